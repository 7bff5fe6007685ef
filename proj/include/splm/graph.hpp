// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff on a linear tape. Ops append nodes in topological
// order; backward() walks the tape once in reverse. Freezing is mask-based:
// gradients flow through every node, but only parameters named in the
// trainable set appear in the returned gradient map.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "splm/tensor.hpp"

namespace splm {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;
using TrainableSet = std::unordered_set<std::string>;

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

template <typename T>
class Graph {
public:
    Graph() { nodes_.reserve(1024); }

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // ------------------------------------------------------------------ leaves

    NodeId input(Tensor<T> v) { return push(std::move(v), nullptr); }

    NodeId zeros(Shape s) { return input(Tensor<T>::zeros(std::move(s))); }

    NodeId param(const std::string& name, const Tensor<T>& v) {
        NodeId id = push(v, nullptr);
        nodes_[id].param_name = name;
        return id;
    }

    // -------------------------------------------------------------- accessors

    const Tensor<T>& value(NodeId id) const { return nodes_[id].value; }

    // Valid after backward(); zero tensor if the node was never reached.
    const Tensor<T>& grad(NodeId id) {
        ensure_grad(id);
        return nodes_[id].grad;
    }

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    // ------------------------------------------------------------------- ops

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor<T>& A = val(a);
        const Tensor<T>& B = val(b);
        require_2d(A, "matmul lhs");
        require_2d(B, "matmul rhs");
        if (A.shape[1] != B.shape[0]) {
            throw ShapeError("matmul: inner dimensions differ, lhs " + shape_str(A.shape) +
                             " rhs " + shape_str(B.shape));
        }
        std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
        Tensor<T> out = Tensor<T>::zeros({m, n});
        mm_nn(A.data.data(), B.data.data(), out.data.data(), m, k, n);
        return push(std::move(out), [a, b, m, k, n](Graph& g, const Node& node) {
            const T* dc = node.grad.data.data();
            mm_nt(dc, g.val(b).data.data(), g.ensure_grad(a).data.data(), m, n, k, true);
            mm_tn(g.val(a).data.data(), dc, g.ensure_grad(b).data.data(), k, m, n, true);
        }, "matmul");
    }

    // a (m x k) times b^T where b is (n x k).
    NodeId matmul_nt(NodeId a, NodeId b) {
        const Tensor<T>& A = val(a);
        const Tensor<T>& B = val(b);
        require_2d(A, "matmul_nt lhs");
        require_2d(B, "matmul_nt rhs");
        if (A.shape[1] != B.shape[1]) {
            throw ShapeError("matmul_nt: inner dimensions differ, lhs " + shape_str(A.shape) +
                             " rhs " + shape_str(B.shape));
        }
        std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[0];
        Tensor<T> out = Tensor<T>::zeros({m, n});
        mm_nt(A.data.data(), B.data.data(), out.data.data(), m, k, n);
        return push(std::move(out), [a, b, m, k, n](Graph& g, const Node& node) {
            const T* dc = node.grad.data.data();
            mm_nn(dc, g.val(b).data.data(), g.ensure_grad(a).data.data(), m, n, k, true);
            mm_tn(dc, g.val(a).data.data(), g.ensure_grad(b).data.data(), n, m, k, true);
        }, "matmul_nt");
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor<T>& A = val(a);
        const Tensor<T>& B = val(b);
        require_same_shape(A, B, "add");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
        return push(std::move(out), [a, b](Graph& g, const Node& node) {
            g.accumulate(a, node.grad);
            g.accumulate(b, node.grad);
        }, "add");
    }

    NodeId sub(NodeId a, NodeId b) {
        const Tensor<T>& A = val(a);
        const Tensor<T>& B = val(b);
        require_same_shape(A, B, "sub");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
        return push(std::move(out), [a, b](Graph& g, const Node& node) {
            g.accumulate(a, node.grad);
            Tensor<T>& db = g.ensure_grad(b);
            for (std::size_t i = 0; i < db.numel(); ++i) db[i] -= node.grad[i];
        }, "sub");
    }

    NodeId mul(NodeId a, NodeId b) {
        const Tensor<T>& A = val(a);
        const Tensor<T>& B = val(b);
        require_same_shape(A, B, "mul");
        Tensor<T> out = A;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
        return push(std::move(out), [a, b](Graph& g, const Node& node) {
            Tensor<T>& da = g.ensure_grad(a);
            Tensor<T>& db = g.ensure_grad(b);
            const Tensor<T>& A2 = g.val(a);
            const Tensor<T>& B2 = g.val(b);
            for (std::size_t i = 0; i < da.numel(); ++i) {
                da[i] += node.grad[i] * B2[i];
                db[i] += node.grad[i] * A2[i];
            }
        }, "mul");
    }

    // alpha * x + beta, elementwise with scalar constants.
    NodeId affine(NodeId x, T alpha, T beta) {
        Tensor<T> out = val(x);
        for (auto& v : out.data) v = alpha * v + beta;
        return push(std::move(out), [x, alpha](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += alpha * node.grad[i];
        }, "affine");
    }

    NodeId scale(NodeId x, T alpha) { return affine(x, alpha, T(0)); }

    // x (m x n) plus a length-n bias broadcast over rows.
    NodeId add_row_bias(NodeId x, NodeId bias) {
        const Tensor<T>& X = val(x);
        const Tensor<T>& B = val(bias);
        std::size_t m = X.rows(), n = X.cols();
        if (B.numel() != n) {
            throw ShapeError("add_row_bias: bias " + shape_str(B.shape) + " vs input " +
                             shape_str(X.shape));
        }
        Tensor<T> out = X;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += B[j];
        }
        return push(std::move(out), [x, bias, m, n](Graph& g, const Node& node) {
            g.accumulate(x, node.grad);
            Tensor<T>& db = g.ensure_grad(bias);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) db[j] += node.grad.data[i * n + j];
            }
        }, "add_row_bias");
    }

    NodeId gelu(NodeId x) {
        Tensor<T> out = val(x);
        for (auto& v : out.data) v = gelu_scalar(v);
        return push(std::move(out), [x](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            const Tensor<T>& X = g.val(x);
            for (std::size_t i = 0; i < dx.numel(); ++i) {
                dx[i] += node.grad[i] * gelu_grad_scalar(X[i]);
            }
        }, "gelu");
    }

    NodeId sigmoid(NodeId x) {
        Tensor<T> out = val(x);
        for (auto& v : out.data) v = sigmoid_scalar(v);
        NodeId id = push(std::move(out), nullptr, "sigmoid");
        nodes_[id].backward = [x, id](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            const Tensor<T>& Y = g.val(id);
            for (std::size_t i = 0; i < dx.numel(); ++i) {
                dx[i] += node.grad[i] * Y[i] * (T(1) - Y[i]);
            }
        };
        return id;
    }

    NodeId tanh_op(NodeId x) {
        Tensor<T> out = val(x);
        for (auto& v : out.data) v = static_cast<T>(std::tanh(static_cast<double>(v)));
        NodeId id = push(std::move(out), nullptr, "tanh");
        nodes_[id].backward = [x, id](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            const Tensor<T>& Y = g.val(id);
            for (std::size_t i = 0; i < dx.numel(); ++i) {
                dx[i] += node.grad[i] * (T(1) - Y[i] * Y[i]);
            }
        };
        return id;
    }

    // Row-wise softmax. 1-D input is treated as a single row and keeps its
    // shape. Optional column mask: entries with mask 0 get probability 0.
    NodeId softmax_rows(NodeId x, std::vector<std::uint8_t> col_mask = {}) {
        const Tensor<T>& X = val(x);
        std::size_t m = X.rows(), n = X.cols();
        if (n == 0) throw ShapeError("softmax: empty input");
        if (!col_mask.empty() && col_mask.size() != n) {
            throw ShapeError("softmax: mask length " + std::to_string(col_mask.size()) +
                             " vs " + std::to_string(n) + " columns");
        }
        Tensor<T> out = X;
        for (std::size_t i = 0; i < m; ++i) {
            T* row = out.data.data() + i * n;
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                if (col_mask.empty() || col_mask[j]) mx = std::max(mx, static_cast<double>(row[j]));
            }
            double z = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (col_mask.empty() || col_mask[j]) {
                    double e = std::exp(static_cast<double>(row[j]) - mx);
                    row[j] = static_cast<T>(e);
                    z += e;
                } else {
                    row[j] = T(0);
                }
            }
            for (std::size_t j = 0; j < n; ++j) row[j] = static_cast<T>(row[j] / z);
        }
        NodeId id = push(std::move(out), nullptr, "softmax");
        nodes_[id].backward = [x, id, m, n](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            const Tensor<T>& Y = g.val(id);
            for (std::size_t i = 0; i < m; ++i) {
                const T* y = Y.data.data() + i * n;
                const T* dy = node.grad.data.data() + i * n;
                T dot = T(0);
                for (std::size_t j = 0; j < n; ++j) dot += dy[j] * y[j];
                T* dxr = dx.data.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) dxr[j] += (dy[j] - dot) * y[j];
            }
        };
        return id;
    }

    // Row-wise layer norm with population variance; gamma/beta length n.
    NodeId layer_norm_rows(NodeId x, NodeId gamma, NodeId beta, T eps) {
        const Tensor<T>& X = val(x);
        std::size_t m = X.rows(), n = X.cols();
        if (n == 0) throw ShapeError("layer_norm: empty input");
        if (val(gamma).numel() != n || val(beta).numel() != n) {
            throw ShapeError("layer_norm: gamma/beta length vs input " + shape_str(X.shape));
        }
        Tensor<T> out = Tensor<T>::zeros(X.shape);
        Tensor<T> xhat = Tensor<T>::zeros(X.shape);
        std::vector<T> inv_std(m);
        const Tensor<T>& G = val(gamma);
        const Tensor<T>& Bt = val(beta);
        for (std::size_t i = 0; i < m; ++i) {
            const T* row = X.data.data() + i * n;
            double mu = 0;
            for (std::size_t j = 0; j < n; ++j) mu += row[j];
            mu /= n;
            double var = 0;
            for (std::size_t j = 0; j < n; ++j) {
                double d = row[j] - mu;
                var += d * d;
            }
            var /= n;
            double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
            inv_std[i] = static_cast<T>(is);
            for (std::size_t j = 0; j < n; ++j) {
                T xh = static_cast<T>((row[j] - mu) * is);
                xhat.data[i * n + j] = xh;
                out.data[i * n + j] = G[j] * xh + Bt[j];
            }
        }
        return push(std::move(out),
                    [x, gamma, beta, m, n, xhat = std::move(xhat),
                     inv_std = std::move(inv_std)](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            Tensor<T>& dgamma = g.ensure_grad(gamma);
            Tensor<T>& dbeta = g.ensure_grad(beta);
            const Tensor<T>& G = g.val(gamma);
            for (std::size_t i = 0; i < m; ++i) {
                const T* dy = node.grad.data.data() + i * n;
                const T* xh = xhat.data.data() + i * n;
                double sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    double dxh = static_cast<double>(dy[j]) * G[j];
                    sum_dxhat += dxh;
                    sum_dxhat_xhat += dxh * xh[j];
                    dgamma[j] += dy[j] * xh[j];
                    dbeta[j] += dy[j];
                }
                double inv_n = 1.0 / n;
                T* dxr = dx.data.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    double dxh = static_cast<double>(dy[j]) * G[j];
                    dxr[j] += static_cast<T>(inv_std[i] *
                                             (dxh - inv_n * sum_dxhat - xh[j] * inv_n * sum_dxhat_xhat));
                }
            }
        }, "layer_norm");
    }

    // Inverted dropout; call only when training and p > 0.
    NodeId dropout(NodeId x, double p, Rng& rng) {
        if (p < 0 || p >= 1) throw ContractError("dropout probability must be in [0, 1)");
        const Tensor<T>& X = val(x);
        std::vector<std::uint8_t> keep(X.numel());
        T scale = static_cast<T>(1.0 / (1.0 - p));
        Tensor<T> out = X;
        for (std::size_t i = 0; i < X.numel(); ++i) {
            keep[i] = rng.uniform() >= p ? 1 : 0;
            out[i] = keep[i] ? out[i] * scale : T(0);
        }
        return push(std::move(out), [x, keep = std::move(keep), scale](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            for (std::size_t i = 0; i < dx.numel(); ++i) {
                if (keep[i]) dx[i] += node.grad[i] * scale;
            }
        }, "dropout");
    }

    NodeId concat_rows(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw ShapeError("concat_rows: no inputs");
        std::size_t n = val(parts[0]).cols();
        std::size_t m = 0;
        for (NodeId p : parts) {
            if (val(p).cols() != n) {
                throw ShapeError("concat_rows: column mismatch " + shape_str(val(p).shape));
            }
            m += val(p).rows();
        }
        Tensor<T> out = Tensor<T>::zeros({m, n});
        std::size_t r = 0;
        for (NodeId p : parts) {
            const Tensor<T>& P = val(p);
            std::copy(P.data.begin(), P.data.end(), out.data.begin() + r * n);
            r += P.rows();
        }
        return push(std::move(out), [parts, n](Graph& g, const Node& node) {
            std::size_t r = 0;
            for (NodeId p : parts) {
                Tensor<T>& dp = g.ensure_grad(p);
                std::size_t rows = g.val(p).rows();
                for (std::size_t i = 0; i < rows * n; ++i) {
                    dp.data[i] += node.grad.data[r * n + i];
                }
                r += rows;
            }
        }, "concat_rows");
    }

    NodeId concat_cols(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw ShapeError("concat_cols: no inputs");
        std::size_t m = val(parts[0]).rows();
        std::size_t n = 0;
        for (NodeId p : parts) {
            if (val(p).rows() != m) {
                throw ShapeError("concat_cols: row mismatch " + shape_str(val(p).shape));
            }
            n += val(p).cols();
        }
        Tensor<T> out = Tensor<T>::zeros({m, n});
        std::size_t c = 0;
        for (NodeId p : parts) {
            const Tensor<T>& P = val(p);
            std::size_t pc = P.cols();
            for (std::size_t i = 0; i < m; ++i) {
                std::copy(P.data.begin() + i * pc, P.data.begin() + (i + 1) * pc,
                          out.data.begin() + i * n + c);
            }
            c += pc;
        }
        return push(std::move(out), [parts, m, n](Graph& g, const Node& node) {
            std::size_t c = 0;
            for (NodeId p : parts) {
                Tensor<T>& dp = g.ensure_grad(p);
                std::size_t pc = g.val(p).cols();
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < pc; ++j) {
                        dp.data[i * pc + j] += node.grad.data[i * n + c + j];
                    }
                }
                c += pc;
            }
        }, "concat_cols");
    }

    NodeId row_slice(NodeId x, std::size_t r0, std::size_t count) {
        const Tensor<T>& X = val(x);
        std::size_t m = X.rows(), n = X.cols();
        if (r0 + count > m) {
            throw ShapeError("row_slice: rows [" + std::to_string(r0) + ", " +
                             std::to_string(r0 + count) + ") out of " + std::to_string(m));
        }
        Tensor<T> out({count, n},
                      std::vector<T>(X.data.begin() + r0 * n, X.data.begin() + (r0 + count) * n));
        return push(std::move(out), [x, r0, n, count](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            for (std::size_t i = 0; i < count * n; ++i) {
                dx.data[r0 * n + i] += node.grad.data[i];
            }
        }, "row_slice");
    }

    NodeId col_slice(NodeId x, std::size_t c0, std::size_t count) {
        const Tensor<T>& X = val(x);
        std::size_t m = X.rows(), n = X.cols();
        if (c0 + count > n) {
            throw ShapeError("col_slice: cols [" + std::to_string(c0) + ", " +
                             std::to_string(c0 + count) + ") out of " + std::to_string(n));
        }
        Tensor<T> out = Tensor<T>::zeros({m, count});
        for (std::size_t i = 0; i < m; ++i) {
            std::copy(X.data.begin() + i * n + c0, X.data.begin() + i * n + c0 + count,
                      out.data.begin() + i * count);
        }
        return push(std::move(out), [x, c0, n, count, m](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < count; ++j) {
                    dx.data[i * n + c0 + j] += node.grad.data[i * count + j];
                }
            }
        }, "col_slice");
    }

    NodeId reshape(NodeId x, Shape s) {
        const Tensor<T>& X = val(x);
        if (shape_numel(s) != X.numel()) {
            throw ShapeError("reshape: " + shape_str(X.shape) + " to " + shape_str(s));
        }
        Tensor<T> out(std::move(s), X.data);
        return push(std::move(out), [x](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += node.grad[i];
        }, "reshape");
    }

    NodeId gather_rows(NodeId x, std::vector<std::size_t> indices) {
        const Tensor<T>& X = val(x);
        std::size_t n = X.cols();
        for (std::size_t idx : indices) {
            if (idx >= X.rows()) {
                throw ShapeError("gather_rows: index " + std::to_string(idx) + " out of " +
                                 std::to_string(X.rows()) + " rows");
            }
        }
        Tensor<T> out = Tensor<T>::zeros({indices.size(), n});
        for (std::size_t i = 0; i < indices.size(); ++i) {
            std::copy(X.data.begin() + indices[i] * n, X.data.begin() + (indices[i] + 1) * n,
                      out.data.begin() + i * n);
        }
        return push(std::move(out), [x, indices = std::move(indices), n](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            for (std::size_t i = 0; i < indices.size(); ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    dx.data[indices[i] * n + j] += node.grad.data[i * n + j];
                }
            }
        }, "gather_rows");
    }

    NodeId mean_all(NodeId x) {
        const Tensor<T>& X = val(x);
        if (X.numel() == 0) throw ShapeError("mean_all: empty input");
        double s = 0;
        for (T v : X.data) s += v;
        Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / X.numel()));
        return push(std::move(out), [x](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(x);
            T gv = node.grad[0] / static_cast<T>(dx.numel());
            for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += gv;
        }, "mean_all");
    }

    // Weighted sum of scalar nodes.
    NodeId sum_scalars(const std::vector<NodeId>& terms, const std::vector<T>& weights) {
        if (terms.empty() || terms.size() != weights.size()) {
            throw ShapeError("sum_scalars: needs matching non-empty terms and weights");
        }
        double s = 0;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            if (val(terms[i]).numel() != 1) throw ShapeError("sum_scalars: non-scalar term");
            s += static_cast<double>(weights[i]) * val(terms[i])[0];
        }
        Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
        return push(std::move(out), [terms, weights](Graph& g, const Node& node) {
            for (std::size_t i = 0; i < terms.size(); ++i) {
                g.ensure_grad(terms[i])[0] += weights[i] * node.grad[0];
            }
        }, "sum_scalars");
    }

    // Mean cross entropy of row-wise logits against integer targets.
    NodeId cross_entropy_rows(NodeId logits, const std::vector<std::size_t>& targets) {
        const Tensor<T>& X = val(logits);
        std::size_t m = X.rows(), n = X.cols();
        if (m == 0 || m != targets.size()) {
            throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(m) + " rows");
        }
        Tensor<T> probs = Tensor<T>::zeros(X.shape);
        double loss = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (targets[i] >= n) throw ShapeError("cross_entropy: target out of vocab");
            const T* row = X.data.data() + i * n;
            double mx = row[0];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, static_cast<double>(row[j]));
            double z = 0;
            for (std::size_t j = 0; j < n; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
            double logz = mx + std::log(z);
            loss += logz - static_cast<double>(row[targets[i]]);
            for (std::size_t j = 0; j < n; ++j) {
                probs.data[i * n + j] =
                    static_cast<T>(std::exp(static_cast<double>(row[j]) - logz));
            }
        }
        Tensor<T> out = Tensor<T>::scalar(static_cast<T>(loss / m));
        return push(std::move(out),
                    [logits, targets, probs = std::move(probs), m, n](Graph& g, const Node& node) {
            Tensor<T>& dx = g.ensure_grad(logits);
            T gv = node.grad[0] / static_cast<T>(m);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    T p = probs.data[i * n + j];
                    dx.data[i * n + j] += gv * (p - (j == targets[i] ? T(1) : T(0)));
                }
            }
        }, "cross_entropy");
    }

    // (pred - target)^2 for a scalar node.
    NodeId squared_error(NodeId pred, T target) {
        if (val(pred).numel() != 1) throw ShapeError("squared_error: prediction must be scalar");
        T d = val(pred)[0] - target;
        Tensor<T> out = Tensor<T>::scalar(d * d);
        return push(std::move(out), [pred, target](Graph& g, const Node& node) {
            g.ensure_grad(pred)[0] += node.grad[0] * T(2) * (g.val(pred)[0] - target);
        }, "squared_error");
    }

    // -------------------------------------------------------------- backward

    GradMap<T> backward(NodeId loss, const TrainableSet& trainable) {
        if (consumed_) throw ContractError("backward: graph already consumed");
        if (val(loss).numel() != 1) {
            throw ContractError("backward: loss must be scalar, got " +
                                shape_str(val(loss).shape));
        }
        consumed_ = true;
        ensure_grad(loss)[0] = T(1);
        for (std::size_t i = loss + 1; i-- > 0;) {
            Node& node = nodes_[i];
            if (node.grad.numel() != 0 && node.backward) {
                node.backward(*this, node);
            }
        }
        GradMap<T> out;
        for (const Node& node : nodes_) {
            if (!node.param_name.empty() && trainable.count(node.param_name)) {
                if (node.grad.numel() != 0) {
                    if (!node.grad.all_finite()) {
                        throw NonFiniteError("non-finite gradient for parameter " + node.param_name);
                    }
                    auto it = out.find(node.param_name);
                    if (it == out.end()) {
                        out.emplace(node.param_name, node.grad);
                    } else {
                        for (std::size_t i = 0; i < it->second.numel(); ++i) {
                            it->second[i] += node.grad[i];
                        }
                    }
                } else {
                    out.emplace(node.param_name, Tensor<T>::zeros(node.value.shape));
                }
            }
        }
        return out;
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::string param_name;
        std::function<void(Graph&, const Node&)> backward;
    };

    const Tensor<T>& val(NodeId id) const { return nodes_[id].value; }

    Tensor<T>& ensure_grad(NodeId id) {
        Node& node = nodes_[id];
        if (node.grad.numel() == 0) node.grad = Tensor<T>::zeros(node.value.shape);
        return node.grad;
    }

    void accumulate(NodeId id, const Tensor<T>& g) {
        Tensor<T>& dst = ensure_grad(id);
        for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += g[i];
    }

    NodeId push(Tensor<T> value, std::function<void(Graph&, const Node&)> backward,
                const char* op = nullptr) {
        if (op != nullptr) {
            // Forward kernels must never emit NaN/Inf from finite inputs.
            for (T v : value.data) {
                if (!std::isfinite(static_cast<double>(v))) {
                    throw NonFiniteError(std::string("op ") + op + " produced non-finite values");
                }
            }
        }
        nodes_.push_back(Node{std::move(value), Tensor<T>(), {}, std::move(backward)});
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    static void require_2d(const Tensor<T>& t, const char* what) {
        if (t.ndim() != 2) {
            throw ShapeError(std::string(what) + " must be 2-D, got " + shape_str(t.shape));
        }
    }

    static void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
        if (!a.same_shape(b)) {
            throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
        }
    }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace splm
