#pragma once

#include <functional>
#include <vector>

#include "streamchar/core.hpp"

namespace streamchar {

// Reverse-mode autodiff tape over Tensor. One Graph per forward pass;
// node ids are indices into the tape. Leaves reference external storage
// (parameters) and accumulate into an external gradient tensor.
class Graph {
public:
    using Id = int;

    Id constant(Tensor t) { return make(std::move(t), {}, nullptr); }

    Id leaf(const Tensor& value, Tensor* grad_sink) {
        Id id = make(value, {}, nullptr);
        nodes_[static_cast<std::size_t>(id)].leaf_grad = grad_sink;
        return id;
    }

    const Tensor& val(Id id) const { return nodes_[static_cast<std::size_t>(id)].val; }
    Tensor& grad(Id id) { return ensure_grad(id); }

    Id add(Id a, Id b) {
        const Tensor &A = val(a), &B = val(b);
        require(A.same_shape(B), "add: shape mismatch");
        Tensor out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += B.v[i];
        return make(std::move(out), {a, b}, [this, a, b](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor &ga = ensure_grad(a), &gb = ensure_grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga.v[i] += g.v[i];
                gb.v[i] += g.v[i];
            }
        });
    }

    Id sub(Id a, Id b) {
        const Tensor &A = val(a), &B = val(b);
        require(A.same_shape(B), "sub: shape mismatch");
        Tensor out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= B.v[i];
        return make(std::move(out), {a, b}, [this, a, b](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor &ga = ensure_grad(a), &gb = ensure_grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga.v[i] += g.v[i];
                gb.v[i] -= g.v[i];
            }
        });
    }

    Id mul(Id a, Id b) {
        const Tensor &A = val(a), &B = val(b);
        require(A.same_shape(B), "mul: shape mismatch");
        Tensor out = A;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= B.v[i];
        return make(std::move(out), {a, b}, [this, a, b](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor &A2 = val(a), &B2 = val(b);
            Tensor &ga = ensure_grad(a), &gb = ensure_grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga.v[i] += g.v[i] * B2.v[i];
                gb.v[i] += g.v[i] * A2.v[i];
            }
        });
    }

    Id scale(Id a, double c) {
        Tensor out = val(a);
        for (double& x : out.v) x *= c;
        return make(std::move(out), {a}, [this, a, c](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += c * g.v[i];
        });
    }

    // (m,k) x (k,n) -> (m,n)
    Id matmul(Id a, Id b) {
        const Tensor &A = val(a), &B = val(b);
        require(A.cols == B.rows, "matmul: inner dim mismatch");
        Tensor out(A.rows, B.cols);
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t k = 0; k < A.cols; ++k) {
                double aik = A.at(i, k);
                if (aik == 0.0) continue;
                const double* brow = B.row(k);
                double* orow = out.row(i);
                for (std::size_t j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
            }
        return make(std::move(out), {a, b}, [this, a, b](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor &A2 = val(a), &B2 = val(b);
            Tensor &ga = ensure_grad(a), &gb = ensure_grad(b);
            // ga += g * B^T ; gb += A^T * g
            for (std::size_t i = 0; i < A2.rows; ++i)
                for (std::size_t j = 0; j < B2.cols; ++j) {
                    double gij = g.at(i, j);
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < A2.cols; ++k) {
                        ga.at(i, k) += gij * B2.at(k, j);
                        gb.at(k, j) += A2.at(i, k) * gij;
                    }
                }
        });
    }

    // (m,k) x (n,k)^T -> (m,n)
    Id matmul_nt(Id a, Id b) {
        const Tensor &A = val(a), &B = val(b);
        require(A.cols == B.cols, "matmul_nt: inner dim mismatch");
        Tensor out(A.rows, B.rows);
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t j = 0; j < B.rows; ++j) {
                double s = 0.0;
                const double *ar = A.row(i), *br = B.row(j);
                for (std::size_t k = 0; k < A.cols; ++k) s += ar[k] * br[k];
                out.at(i, j) = s;
            }
        return make(std::move(out), {a, b}, [this, a, b](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor &A2 = val(a), &B2 = val(b);
            Tensor &ga = ensure_grad(a), &gb = ensure_grad(b);
            for (std::size_t i = 0; i < A2.rows; ++i)
                for (std::size_t j = 0; j < B2.rows; ++j) {
                    double gij = g.at(i, j);
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < A2.cols; ++k) {
                        ga.at(i, k) += gij * B2.at(j, k);
                        gb.at(j, k) += gij * A2.at(i, k);
                    }
                }
        });
    }

    // bias is (1, n); added to every row.
    Id add_rowvec(Id a, Id bias) {
        const Tensor &A = val(a), &B = val(bias);
        require(B.rows == 1 && B.cols == A.cols, "add_rowvec: bad bias shape");
        Tensor out = A;
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t j = 0; j < A.cols; ++j) out.at(i, j) += B.at(0, j);
        return make(std::move(out), {a, bias}, [this, a, bias](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor &ga = ensure_grad(a), &gb = ensure_grad(bias);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) {
                    ga.at(i, j) += g.at(i, j);
                    gb.at(0, j) += g.at(i, j);
                }
        });
    }

    Id concat_rows(const std::vector<Id>& parts) {
        require(!parts.empty(), "concat_rows: empty");
        std::size_t rows = 0, cols = val(parts[0]).cols;
        for (Id p : parts) {
            require(val(p).cols == cols, "concat_rows: col mismatch");
            rows += val(p).rows;
        }
        Tensor out(rows, cols);
        std::size_t r = 0;
        for (Id p : parts) {
            const Tensor& P = val(p);
            std::copy(P.v.begin(), P.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(r * cols));
            r += P.rows;
        }
        return make(std::move(out), parts, [this, parts](Id me) {
            const Tensor& g = ensure_grad(me);
            std::size_t r0 = 0;
            for (Id p : parts) {
                Tensor& gp = ensure_grad(p);
                for (std::size_t i = 0; i < gp.rows; ++i)
                    for (std::size_t j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(r0 + i, j);
                r0 += gp.rows;
            }
        });
    }

    Id slice_rows(Id a, std::size_t r0, std::size_t r1) {
        const Tensor& A = val(a);
        require(r0 <= r1 && r1 <= A.rows, "slice_rows: bad range");
        Tensor out(r1 - r0, A.cols);
        std::copy(A.v.begin() + static_cast<std::ptrdiff_t>(r0 * A.cols),
                  A.v.begin() + static_cast<std::ptrdiff_t>(r1 * A.cols), out.v.begin());
        return make(std::move(out), {a}, [this, a, r0](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) ga.at(r0 + i, j) += g.at(i, j);
        });
    }

    Id slice_cols(Id a, std::size_t c0, std::size_t c1) {
        const Tensor& A = val(a);
        require(c0 <= c1 && c1 <= A.cols, "slice_cols: bad range");
        Tensor out(A.rows, c1 - c0);
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = A.at(i, j);
        return make(std::move(out), {a}, [this, a, c0](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) ga.at(i, c0 + j) += g.at(i, j);
        });
    }

    Id concat_cols(const std::vector<Id>& parts) {
        require(!parts.empty(), "concat_cols: empty");
        std::size_t rows = val(parts[0]).rows, cols = 0;
        for (Id p : parts) {
            require(val(p).rows == rows, "concat_cols: row mismatch");
            cols += val(p).cols;
        }
        Tensor out(rows, cols);
        std::size_t c = 0;
        for (Id p : parts) {
            const Tensor& P = val(p);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < P.cols; ++j) out.at(i, c + j) = P.at(i, j);
            c += P.cols;
        }
        return make(std::move(out), parts, [this, parts](Id me) {
            const Tensor& g = ensure_grad(me);
            std::size_t c0 = 0;
            for (Id p : parts) {
                Tensor& gp = ensure_grad(p);
                for (std::size_t i = 0; i < gp.rows; ++i)
                    for (std::size_t j = 0; j < gp.cols; ++j) gp.at(i, j) += g.at(i, c0 + j);
                c0 += gp.cols;
            }
        });
    }

    Id gather_rows(Id a, std::vector<std::size_t> idx) {
        const Tensor& A = val(a);
        for (std::size_t i : idx) require(i < A.rows, "gather_rows: index out of range");
        Tensor out(idx.size(), A.cols);
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy(A.row(idx[i]), A.row(idx[i]) + A.cols, out.row(i));
        return make(std::move(out), {a}, [this, a, idx = std::move(idx)](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < g.cols; ++j) ga.at(idx[i], j) += g.at(i, j);
        });
    }

    // Inverse of gather: rows of a land at idx in a (total, cols) output.
    Id scatter_rows(Id a, std::vector<std::size_t> idx, std::size_t total) {
        const Tensor& A = val(a);
        require(idx.size() == A.rows, "scatter_rows: index count mismatch");
        Tensor out(total, A.cols);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            require(idx[i] < total, "scatter_rows: index out of range");
            std::copy(A.row(i), A.row(i) + A.cols, out.row(idx[i]));
        }
        return make(std::move(out), {a}, [this, a, idx = std::move(idx)](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < g.cols; ++j) ga.at(i, j) += g.at(idx[i], j);
        });
    }

    Id silu(Id a) {
        Tensor out = val(a);
        for (double& x : out.v) x = x / (1.0 + std::exp(-x));
        return make(std::move(out), {a}, [this, a](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor& A = val(a);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                double s = 1.0 / (1.0 + std::exp(-A.v[i]));
                ga.v[i] += g.v[i] * s * (1.0 + A.v[i] * (1.0 - s));
            }
        });
    }

    Id tanh_(Id a) {
        Tensor out = val(a);
        for (double& x : out.v) x = std::tanh(x);
        return make(std::move(out), {a}, [this, a](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor& Y = val(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < g.size(); ++i)
                ga.v[i] += g.v[i] * (1.0 - Y.v[i] * Y.v[i]);
        });
    }

    // Per-row RMS normalization with a learned gain (1, cols).
    Id rmsnorm(Id a, Id gain) {
        const Tensor &A = val(a), &G = val(gain);
        require(G.rows == 1 && G.cols == A.cols, "rmsnorm: bad gain shape");
        const double eps = 1e-8;
        Tensor out(A.rows, A.cols);
        for (std::size_t i = 0; i < A.rows; ++i) {
            double ms = 0.0;
            for (std::size_t j = 0; j < A.cols; ++j) ms += A.at(i, j) * A.at(i, j);
            double r = std::sqrt(ms / static_cast<double>(A.cols) + eps);
            for (std::size_t j = 0; j < A.cols; ++j) out.at(i, j) = A.at(i, j) * G.at(0, j) / r;
        }
        return make(std::move(out), {a, gain}, [this, a, gain, eps](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor &A2 = val(a), &G2 = val(gain);
            Tensor &ga = ensure_grad(a), &gg = ensure_grad(gain);
            std::size_t n = A2.cols;
            for (std::size_t i = 0; i < A2.rows; ++i) {
                double ms = 0.0;
                for (std::size_t j = 0; j < n; ++j) ms += A2.at(i, j) * A2.at(i, j);
                double r = std::sqrt(ms / static_cast<double>(n) + eps);
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g.at(i, j) * G2.at(0, j) * A2.at(i, j);
                for (std::size_t j = 0; j < n; ++j) {
                    ga.at(i, j) += g.at(i, j) * G2.at(0, j) / r -
                                   A2.at(i, j) * dot / (static_cast<double>(n) * r * r * r);
                    gg.at(0, j) += g.at(i, j) * A2.at(i, j) / r;
                }
            }
        });
    }

    // Row softmax over entries where mask != 0; masked entries get probability 0.
    // mask rows may also be fully zero only if never consumed.
    Id softmax_rows(Id a, const Tensor& mask) {
        const Tensor& A = val(a);
        require(mask.same_shape(A), "softmax_rows: mask shape mismatch");
        Tensor out(A.rows, A.cols);
        for (std::size_t i = 0; i < A.rows; ++i) {
            double mx = -1e300;
            for (std::size_t j = 0; j < A.cols; ++j)
                if (mask.at(i, j) != 0.0) mx = std::max(mx, A.at(i, j));
            double z = 0.0;
            for (std::size_t j = 0; j < A.cols; ++j) {
                if (mask.at(i, j) != 0.0) {
                    out.at(i, j) = std::exp(A.at(i, j) - mx);
                    z += out.at(i, j);
                }
            }
            if (z > 0.0)
                for (std::size_t j = 0; j < A.cols; ++j) out.at(i, j) /= z;
        }
        return make(std::move(out), {a}, [this, a](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor& P = val(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < P.rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < P.cols; ++j) dot += g.at(i, j) * P.at(i, j);
                for (std::size_t j = 0; j < P.cols; ++j)
                    ga.at(i, j) += P.at(i, j) * (g.at(i, j) - dot);
            }
        });
    }

    // Rotate column pairs (2p, 2p+1) of each row by angles (rows, cols/2).
    Id rope(Id a, const Tensor& angles) {
        const Tensor& A = val(a);
        require(A.cols % 2 == 0, "rope: odd dim");
        require(angles.rows == A.rows && angles.cols == A.cols / 2, "rope: bad angle shape");
        Tensor out(A.rows, A.cols);
        for (std::size_t i = 0; i < A.rows; ++i)
            for (std::size_t p = 0; p < A.cols / 2; ++p) {
                double c = std::cos(angles.at(i, p)), s = std::sin(angles.at(i, p));
                double x = A.at(i, 2 * p), y = A.at(i, 2 * p + 1);
                out.at(i, 2 * p) = c * x - s * y;
                out.at(i, 2 * p + 1) = s * x + c * y;
            }
        return make(std::move(out), {a}, [this, a, angles](Id me) {
            const Tensor& g = ensure_grad(me);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t p = 0; p < g.cols / 2; ++p) {
                    double c = std::cos(angles.at(i, p)), s = std::sin(angles.at(i, p));
                    double gx = g.at(i, 2 * p), gy = g.at(i, 2 * p + 1);
                    ga.at(i, 2 * p) += c * gx + s * gy;
                    ga.at(i, 2 * p + 1) += -s * gx + c * gy;
                }
        });
    }

    Id clamp(Id a, double lo, double hi) {
        Tensor out = val(a);
        for (double& x : out.v) x = std::min(hi, std::max(lo, x));
        return make(std::move(out), {a}, [this, a, lo, hi](Id me) {
            const Tensor& g = ensure_grad(me);
            const Tensor& A = val(a);
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (A.v[i] > lo && A.v[i] < hi) ga.v[i] += g.v[i];
        });
    }

    // Scalar (1,1) node: sum of all entries.
    Id sum(Id a) {
        double s = 0.0;
        for (double x : val(a).v) s += x;
        Tensor out(1, 1);
        out.v[0] = s;
        return make(std::move(out), {a}, [this, a](Id me) {
            double g = ensure_grad(me).v[0];
            Tensor& ga = ensure_grad(a);
            for (double& x : ga.v) x += g;
        });
    }

    Id mean_sq_diff(Id a, const Tensor& target) {
        const Tensor& A = val(a);
        require(A.same_shape(target), "mean_sq_diff: shape mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) {
            double d = A.v[i] - target.v[i];
            s += d * d;
        }
        Tensor out(1, 1);
        out.v[0] = s / static_cast<double>(A.size());
        return make(std::move(out), {a}, [this, a, target](Id me) {
            double g = ensure_grad(me).v[0];
            const Tensor& A2 = val(a);
            Tensor& ga = ensure_grad(a);
            double k = 2.0 * g / static_cast<double>(A2.size());
            for (std::size_t i = 0; i < A2.size(); ++i)
                ga.v[i] += k * (A2.v[i] - target.v[i]);
        });
    }

    // Smooth l1 with transition 1 on a scalar node against a constant target.
    Id smooth_l1(Id a, double target) {
        const Tensor& A = val(a);
        require(A.size() == 1, "smooth_l1: scalar only");
        double d = A.v[0] - target;
        Tensor out(1, 1);
        out.v[0] = (std::abs(d) < 1.0) ? 0.5 * d * d : std::abs(d) - 0.5;
        return make(std::move(out), {a}, [this, a, target](Id me) {
            double g = ensure_grad(me).v[0];
            double d2 = val(a).v[0] - target;
            double slope = (std::abs(d2) < 1.0) ? d2 : (d2 > 0 ? 1.0 : -1.0);
            ensure_grad(a).v[0] += g * slope;
        });
    }

    // Sum of elementwise product with a constant; the DMD surrogate.
    Id dot_const(Id a, const Tensor& c) {
        const Tensor& A = val(a);
        require(A.same_shape(c), "dot_const: shape mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) s += A.v[i] * c.v[i];
        Tensor out(1, 1);
        out.v[0] = s;
        return make(std::move(out), {a}, [this, a, c](Id me) {
            double g = ensure_grad(me).v[0];
            Tensor& ga = ensure_grad(a);
            for (std::size_t i = 0; i < ga.size(); ++i) ga.v[i] += g * c.v[i];
        });
    }

    // Backprop from a scalar loss node through the tape.
    void backward(Id loss) {
        require(val(loss).size() == 1, "backward: loss must be scalar");
        ensure_grad(loss).v[0] = 1.0;
        for (Id id = loss; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.grad.size() == 0) continue;
            if (n.back) n.back(id);
            if (n.leaf_grad) {
                require(n.leaf_grad->same_shape(n.grad), "backward: leaf grad shape mismatch");
                for (std::size_t i = 0; i < n.grad.size(); ++i)
                    n.leaf_grad->v[i] += n.grad.v[i];
            }
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        Tensor grad;  // lazily sized
        std::function<void(Id)> back;
        Tensor* leaf_grad = nullptr;
    };

    Tensor& ensure_grad(Id id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() == 0) n.grad = Tensor::zeros(n.val.rows, n.val.cols);
        return n.grad;
    }

    Id make(Tensor val, std::vector<Id> parents, std::function<void(Id)> back) {
        (void)parents;
        nodes_.push_back(Node{std::move(val), Tensor{}, std::move(back), nullptr});
        return static_cast<Id>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

}  // namespace streamchar
