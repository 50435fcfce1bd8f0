/*
 * Copyright 2026 The specdec-lab Authors.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "specdec_lab/tinymodel/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "specdec_lab/errors.hpp"

namespace specdec_lab::tinymodel {

namespace {

constexpr double kRmsEps = 1e-5;
constexpr double kRopeBase = 10000.0;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch");
  }
}

}  // namespace

template <typename T>
Tensor<T> Tensor<T>::constant(Matrix<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Matrix<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

template <typename T>
Matrix<T> row_softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T max = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - max).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

template <typename T>
bool Graph<T>::any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!grad_enabled_) {
    return false;
  }
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
Tensor<T> Graph<T>::record(Matrix<T> value, bool needs_grad,
                           std::function<void(const Matrix<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (needs_grad) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    tape_.push_back(node);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> Graph<T>::matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw InvalidArgument("matmul: inner dimensions differ");
  }
  Matrix<T> out = a.value() * b.value();
  const bool needs = any_requires_grad({&a, &b});
  auto an = a.node();
  auto bn = b.node();
  return record(std::move(out), needs, [an, bn](const Matrix<T>& g) {
    if (an->requires_grad) {
      an->grad_buffer().noalias() += g * bn->value.transpose();
    }
    if (bn->requires_grad) {
      bn->grad_buffer().noalias() += an->value.transpose() * g;
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Matrix<T> out = a.value() + b.value();
  auto an = a.node();
  auto bn = b.node();
  return record(std::move(out), any_requires_grad({&a, &b}), [an, bn](const Matrix<T>& g) {
    if (an->requires_grad) {
      an->accumulate(g);
    }
    if (bn->requires_grad) {
      bn->accumulate(g);
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::rmsnorm(const Tensor<T>& x, const Tensor<T>& gain) {
  if (gain.rows() != 1 || gain.cols() != x.cols()) {
    throw InvalidArgument("rmsnorm: gain must be a 1 x d row");
  }
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_rms(n);
  Matrix<T> out(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T ms = x.value().row(r).squaredNorm() / static_cast<T>(d);
    inv_rms(r) = T(1) / std::sqrt(ms + static_cast<T>(kRmsEps));
    out.row(r) = (x.value().row(r) * inv_rms(r)).cwiseProduct(gain.value());
  }
  auto xn = x.node();
  auto gn = gain.node();
  return record(std::move(out), any_requires_grad({&x, &gain}),
                [xn, gn, inv_rms, d](const Matrix<T>& g) {
                  const Eigen::Index n = xn->value.rows();
                  if (gn->requires_grad) {
                    auto& gg = gn->grad_buffer();
                    for (Eigen::Index r = 0; r < n; ++r) {
                      gg += g.row(r).cwiseProduct(xn->value.row(r)) * inv_rms(r);
                    }
                  }
                  if (xn->requires_grad) {
                    auto& gx = xn->grad_buffer();
                    for (Eigen::Index r = 0; r < n; ++r) {
                      const auto gy = g.row(r).cwiseProduct(gn->value);
                      const T dot = gy.dot(xn->value.row(r));
                      const T ir = inv_rms(r);
                      gx.row(r) += gy * ir - xn->value.row(r) * (dot * ir * ir * ir / static_cast<T>(d));
                    }
                  }
                });
}

template <typename T>
Tensor<T> Graph<T>::gelu(const Tensor<T>& x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T a = static_cast<T>(0.044715);
  Matrix<T> out = x.value().unaryExpr([](T v) {
    return static_cast<T>(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v)));
  });
  auto xn = x.node();
  return record(std::move(out), any_requires_grad({&x}), [xn](const Matrix<T>& g) {
    Matrix<T> dx = xn->value.unaryExpr([](T v) {
      const T inner = c * (v + a * v * v * v);
      const T th = std::tanh(inner);
      const T dinner = c * (T(1) + T(3) * a * v * v);
      return static_cast<T>(0.5) * (T(1) + th) + static_cast<T>(0.5) * v * (T(1) - th * th) * dinner;
    });
    xn->accumulate(dx.cwiseProduct(g));
  });
}

template <typename T>
Tensor<T> Graph<T>::gather_rows(const Tensor<T>& x, std::span<const std::int32_t> rows) {
  Matrix<T> out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw InvalidArgument("gather_rows: row index out of range");
    }
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(rows[i]);
  }
  auto xn = x.node();
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  return record(std::move(out), any_requires_grad({&x}), [xn, idx](const Matrix<T>& g) {
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      gx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) {
    throw InvalidArgument("concat_rows: nothing to concatenate");
  }
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().cols();
  bool needs = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw InvalidArgument("concat_rows: column mismatch");
    }
    rows += p.rows();
    needs = needs || (grad_enabled_ && p.requires_grad());
  }
  Matrix<T> out(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  nodes.reserve(parts.size());
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    nodes.push_back(p.node());
  }
  return record(std::move(out), needs, [nodes](const Matrix<T>& g) {
    Eigen::Index at = 0;
    for (const auto& n : nodes) {
      const Eigen::Index r = n->value.rows();
      if (n->requires_grad) {
        n->grad_buffer() += g.middleRows(at, r);
      }
      at += r;
    }
  });
}

namespace {

// cos/sin per (position, pair), grown on demand; entries match direct evaluation.
class RopeTable {
 public:
  const double* at(std::int64_t pos, std::size_t d_head) {
    if (d_head != d_head_) {
      d_head_ = d_head;
      table_.clear();
      freq_.resize(d_head / 2);
      for (std::size_t i = 0; i < freq_.size(); ++i) {
        freq_[i] = std::pow(kRopeBase, -2.0 * static_cast<double>(i) / static_cast<double>(d_head));
      }
    }
    const std::size_t half = freq_.size();
    const auto p = static_cast<std::size_t>(pos);
    while (table_.size() <= (p + 1) * 2 * half - 1) {
      const auto next = static_cast<double>(table_.size() / (2 * half));
      for (std::size_t i = 0; i < half; ++i) {
        const double angle = next * freq_[i];
        table_.push_back(std::cos(angle));
        table_.push_back(std::sin(angle));
      }
    }
    return table_.data() + p * 2 * half;
  }

 private:
  std::size_t d_head_ = 0;
  std::vector<double> freq_;
  std::vector<double> table_;
};

constexpr std::int64_t kRopeTableLimit = 1 << 20;

template <typename T>
void rotate_rows(Matrix<T>& x, std::span<const std::int64_t> positions, std::size_t d_head,
                 bool inverse) {
  thread_local RopeTable table;
  const auto cols = static_cast<std::size_t>(x.cols());
  const std::size_t half = d_head / 2;
  std::vector<double> direct(2 * half);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const std::int64_t pos = positions[static_cast<std::size_t>(r)];
    const double* cs;
    if (pos >= 0 && pos < kRopeTableLimit) {
      cs = table.at(pos, d_head);
    } else {
      for (std::size_t i = 0; i < half; ++i) {
        const double angle = static_cast<double>(pos) *
            std::pow(kRopeBase, -2.0 * static_cast<double>(i) / static_cast<double>(d_head));
        direct[2 * i] = std::cos(angle);
        direct[2 * i + 1] = std::sin(angle);
      }
      cs = direct.data();
    }
    T* row = x.row(r).data();
    for (std::size_t i = 0; i < half; ++i) {
      const T c = static_cast<T>(cs[2 * i]);
      const T s = static_cast<T>(inverse ? -cs[2 * i + 1] : cs[2 * i + 1]);
      for (std::size_t h = 0; h < cols; h += d_head) {
        T& a = row[h + 2 * i];
        T& b = row[h + 2 * i + 1];
        const T ra = a * c - b * s;
        const T rb = a * s + b * c;
        a = ra;
        b = rb;
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> Graph<T>::rope(const Tensor<T>& x, std::span<const std::int64_t> positions,
                         std::size_t d_head) {
  if (positions.size() != static_cast<std::size_t>(x.rows())) {
    throw InvalidArgument("rope: one position per row required");
  }
  if (d_head % 2 != 0 || static_cast<std::size_t>(x.cols()) % d_head != 0) {
    throw InvalidArgument("rope: d_head must be even and divide the row width");
  }
  Matrix<T> out = x.value();
  rotate_rows(out, positions, d_head, false);
  auto xn = x.node();
  std::vector<std::int64_t> pos(positions.begin(), positions.end());
  return record(std::move(out), any_requires_grad({&x}), [xn, pos, d_head](const Matrix<T>& g) {
    Matrix<T> back = g;
    rotate_rows(back, pos, d_head, true);
    xn->accumulate(back);
  });
}

template <typename T>
Tensor<T> Graph<T>::attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                              const AttendList& lists, const HeadLayout& heads) {
  const std::size_t dh = heads.d_head;
  const std::size_t hq = heads.n_heads;
  const std::size_t hkv = heads.n_kv_heads;
  if (hkv == 0 || hq % hkv != 0 || static_cast<std::size_t>(q.cols()) != hq * dh ||
      static_cast<std::size_t>(k.cols()) != hkv * dh || k.cols() != v.cols() ||
      k.rows() != v.rows() || lists.queries() != static_cast<std::size_t>(q.rows())) {
    throw InvalidArgument("attention: inconsistent shapes");
  }
  for (std::int32_t key : lists.keys) {
    if (key < 0 || key >= k.rows()) {
      throw InvalidArgument("attention: key index out of range");
    }
  }
  const std::size_t group = hq / hkv;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t nq = lists.queries();
  // probs[pair * hq + head]
  std::vector<T> probs(lists.keys.size() * hq);
  Matrix<T> out = Matrix<T>::Zero(q.rows(), q.cols());

  for (std::size_t i = 0; i < nq; ++i) {
    const std::size_t begin = static_cast<std::size_t>(lists.offsets[i]);
    const std::size_t end = static_cast<std::size_t>(lists.offsets[i + 1]);
    if (begin == end) {
      throw InvalidArgument("attention: every query needs at least one key");
    }
    const T* qrow = q.value().row(static_cast<Eigen::Index>(i)).data();
    T* orow = out.row(static_cast<Eigen::Index>(i)).data();
    for (std::size_t h = 0; h < hq; ++h) {
      const std::size_t kvh = h / group;
      const T* qh = qrow + h * dh;
      T max = -std::numeric_limits<T>::infinity();
      for (std::size_t p = begin; p < end; ++p) {
        const T* kr = k.value().row(lists.keys[p]).data() + kvh * dh;
        T s = 0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += qh[c] * kr[c];
        }
        s *= scale;
        probs[p * hq + h] = s;
        max = std::max(max, s);
      }
      T sum = 0;
      for (std::size_t p = begin; p < end; ++p) {
        T& e = probs[p * hq + h];
        e = std::exp(e - max);
        sum += e;
      }
      T* oh = orow + h * dh;
      for (std::size_t p = begin; p < end; ++p) {
        T& a = probs[p * hq + h];
        a /= sum;
        const T* vr = v.value().row(lists.keys[p]).data() + kvh * dh;
        for (std::size_t c = 0; c < dh; ++c) {
          oh[c] += a * vr[c];
        }
      }
    }
  }

  auto qn = q.node();
  auto kn = k.node();
  auto vn = v.node();
  return record(
      std::move(out), any_requires_grad({&q, &k, &v}),
      [qn, kn, vn, lists, probs = std::move(probs), hq, dh, group, scale](const Matrix<T>& g) {
        Matrix<T>* gq = qn->requires_grad ? &qn->grad_buffer() : nullptr;
        Matrix<T>* gk = kn->requires_grad ? &kn->grad_buffer() : nullptr;
        Matrix<T>* gv = vn->requires_grad ? &vn->grad_buffer() : nullptr;
        std::vector<T> dscore;
        for (std::size_t i = 0; i < lists.queries(); ++i) {
          const std::size_t begin = static_cast<std::size_t>(lists.offsets[i]);
          const std::size_t end = static_cast<std::size_t>(lists.offsets[i + 1]);
          dscore.resize(end - begin);
          const T* grow = g.row(static_cast<Eigen::Index>(i)).data();
          const T* qrow = qn->value.row(static_cast<Eigen::Index>(i)).data();
          for (std::size_t h = 0; h < hq; ++h) {
            const std::size_t kvh = h / group;
            const T* gh = grow + h * dh;
            T weighted = 0;
            for (std::size_t p = begin; p < end; ++p) {
              const T a = probs[p * hq + h];
              const T* vr = vn->value.row(lists.keys[p]).data() + kvh * dh;
              T da = 0;
              for (std::size_t c = 0; c < dh; ++c) {
                da += gh[c] * vr[c];
              }
              dscore[p - begin] = da;
              weighted += a * da;
              if (gv) {
                T* gvr = gv->row(lists.keys[p]).data() + kvh * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  gvr[c] += a * gh[c];
                }
              }
            }
            const T* qh = qrow + h * dh;
            for (std::size_t p = begin; p < end; ++p) {
              const T ds = probs[p * hq + h] * (dscore[p - begin] - weighted) * scale;
              const T* kr = kn->value.row(lists.keys[p]).data() + kvh * dh;
              if (gq) {
                T* gqh = gq->row(static_cast<Eigen::Index>(i)).data() + h * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  gqh[c] += ds * kr[c];
                }
              }
              if (gk) {
                T* gkr = gk->row(lists.keys[p]).data() + kvh * dh;
                for (std::size_t c = 0; c < dh; ++c) {
                  gkr[c] += ds * qh[c];
                }
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> Graph<T>::mix_layers(std::span<const Tensor<T>> layers, const Tensor<T>& w,
                               std::size_t row) {
  const auto n = static_cast<Eigen::Index>(layers.size());
  if (layers.empty() || w.cols() != n || static_cast<Eigen::Index>(row) >= w.rows()) {
    throw InvalidArgument("mix_layers: weight row must have one entry per layer");
  }
  Eigen::Matrix<T, 1, Eigen::Dynamic> logits = w.value().row(static_cast<Eigen::Index>(row));
  Eigen::Matrix<T, 1, Eigen::Dynamic> s = (logits.array() - logits.maxCoeff()).exp();
  s /= s.sum();
  Matrix<T> out = Matrix<T>::Zero(layers.front().rows(), layers.front().cols());
  bool needs = grad_enabled_ && w.requires_grad();
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (Eigen::Index l = 0; l < n; ++l) {
    const auto& x = layers[static_cast<std::size_t>(l)];
    if (x.rows() != out.rows() || x.cols() != out.cols()) {
      throw InvalidArgument("mix_layers: layer shapes differ");
    }
    out += s(l) * x.value();
    needs = needs || (grad_enabled_ && x.requires_grad());
    nodes.push_back(x.node());
  }
  auto wn = w.node();
  return record(std::move(out), needs, [nodes, wn, s, row](const Matrix<T>& g) {
    const auto n = static_cast<Eigen::Index>(nodes.size());
    Eigen::Matrix<T, 1, Eigen::Dynamic> ds(n);
    for (Eigen::Index l = 0; l < n; ++l) {
      const auto& x = nodes[static_cast<std::size_t>(l)];
      ds(l) = g.cwiseProduct(x->value).sum();
      if (x->requires_grad) {
        x->grad_buffer() += s(l) * g;
      }
    }
    if (wn->requires_grad) {
      const T mean = s.dot(ds);
      wn->grad_buffer().row(static_cast<Eigen::Index>(row)) +=
          (s.array() * (ds.array() - mean)).matrix();
    }
  });
}

template <typename T>
Tensor<T> Graph<T>::hard_cross_entropy(const Tensor<T>& logits,
                                       std::span<const std::int32_t> labels) {
  const Eigen::Index n = logits.rows();
  if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw InvalidArgument("hard_cross_entropy: one label per row required");
  }
  Matrix<T> probs = row_softmax(logits.value());
  T loss = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= logits.cols()) {
      throw InvalidArgument("hard_cross_entropy: label outside vocabulary");
    }
    loss -= std::log(std::max(probs(r, label), std::numeric_limits<T>::min()));
  }
  loss /= static_cast<T>(n);
  Matrix<T> out(1, 1);
  out(0, 0) = loss;
  auto ln = logits.node();
  std::vector<std::int32_t> lab(labels.begin(), labels.end());
  return record(std::move(out), any_requires_grad({&logits}),
                [ln, lab, probs = std::move(probs)](const Matrix<T>& g) {
                  const T scale = g(0, 0) / static_cast<T>(probs.rows());
                  Matrix<T> d = probs;
                  for (Eigen::Index r = 0; r < d.rows(); ++r) {
                    d(r, lab[static_cast<std::size_t>(r)]) -= T(1);
                  }
                  ln->grad_buffer() += d * scale;
                });
}

template <typename T>
Tensor<T> Graph<T>::soft_cross_entropy(const Tensor<T>& logits, const Matrix<T>& target_probs) {
  if (target_probs.rows() != logits.rows() || target_probs.cols() != logits.cols() ||
      logits.rows() == 0) {
    throw InvalidArgument("soft_cross_entropy: target shape mismatch");
  }
  const Eigen::Index n = logits.rows();
  Matrix<T> probs = row_softmax(logits.value());
  T loss = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const T max = logits.value().row(r).maxCoeff();
    const T lse = max + std::log((logits.value().row(r).array() - max).exp().sum());
    loss -= (target_probs.row(r).array() * (logits.value().row(r).array() - lse)).sum();
  }
  loss /= static_cast<T>(n);
  Matrix<T> out(1, 1);
  out(0, 0) = loss;
  auto ln = logits.node();
  return record(std::move(out), any_requires_grad({&logits}),
                [ln, probs = std::move(probs), target_probs](const Matrix<T>& g) {
                  const T scale = g(0, 0) / static_cast<T>(probs.rows());
                  Matrix<T> d(probs.rows(), probs.cols());
                  for (Eigen::Index r = 0; r < d.rows(); ++r) {
                    d.row(r) = probs.row(r) * target_probs.row(r).sum() - target_probs.row(r);
                  }
                  ln->grad_buffer() += d * scale;
                });
}

template <typename T>
Tensor<T> Graph<T>::expected_acceptance(const Tensor<T>& logits, const Matrix<T>& target_probs) {
  if (target_probs.rows() != logits.rows() || target_probs.cols() != logits.cols() ||
      logits.rows() == 0) {
    throw InvalidArgument("expected_acceptance: target shape mismatch");
  }
  Matrix<T> probs = row_softmax(logits.value());
  const T alpha = probs.cwiseMin(target_probs).sum() / static_cast<T>(probs.rows());
  Matrix<T> out(1, 1);
  out(0, 0) = alpha;
  auto ln = logits.node();
  return record(std::move(out), any_requires_grad({&logits}),
                [ln, probs = std::move(probs), target_probs](const Matrix<T>& g) {
                  const T scale = g(0, 0) / static_cast<T>(probs.rows());
                  Matrix<T> d(probs.rows(), probs.cols());
                  for (Eigen::Index r = 0; r < d.rows(); ++r) {
                    // d alpha / d q_i is 1 where q_i is the smaller term.
                    Eigen::Matrix<T, 1, Eigen::Dynamic> sel =
                        (probs.row(r).array() < target_probs.row(r).array()).template cast<T>();
                    const T mean = probs.row(r).dot(sel);
                    d.row(r) = probs.row(r).cwiseProduct((sel.array() - mean).matrix());
                  }
                  ln->grad_buffer() += d * scale;
                });
}

template <typename T>
Tensor<T> Graph<T>::linear_combination(const Tensor<T>& a, T ca, const Tensor<T>& b, T cb) {
  require_same_shape(a, b, "linear_combination");
  Matrix<T> out = ca * a.value() + cb * b.value();
  auto an = a.node();
  auto bn = b.node();
  return record(std::move(out), any_requires_grad({&a, &b}), [an, bn, ca, cb](const Matrix<T>& g) {
    if (an->requires_grad) {
      an->grad_buffer() += ca * g;
    }
    if (bn->requires_grad) {
      bn->grad_buffer() += cb * g;
    }
  });
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& scalar_out) {
  if (scalar_out.rows() != 1 || scalar_out.cols() != 1) {
    throw InvalidArgument("backward: output must be a scalar");
  }
  if (!scalar_out.requires_grad()) {
    return;
  }
  scalar_out.node()->accumulate(Matrix<T>::Ones(1, 1));
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    Node<T>& node = **it;
    if (node.grad.size() != 0 && node.backward) {
      node.backward(node.grad);
    }
  }
  tape_.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Graph<float>;
template class Graph<double>;
template Matrix<float> row_softmax(const Matrix<float>&);
template Matrix<double> row_softmax(const Matrix<double>&);

}  // namespace specdec_lab::tinymodel
