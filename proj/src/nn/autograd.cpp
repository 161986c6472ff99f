#include "exitrack/nn/autograd.hpp"

#include <cmath>
#include <stdexcept>

namespace exitrack::nn {
namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

}  // namespace

Var Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::variable(Matrix value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(int param_id) {
    if (params_ == nullptr) throw std::logic_error("Tape::param without a ParameterSet");
    Node n;
    n.external = &params_->value(param_id);
    n.param_id = param_id;
    n.requires_grad = param_grad_.empty() || param_grad_[static_cast<std::size_t>(param_id)];
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

const Matrix& Tape::value(Var v) const {
    const Node& n = node(v);
    return n.external != nullptr ? *n.external : n.value;
}

Matrix Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.has_grad) return n.grad;
    const Matrix& val = value(v);
    return Matrix::Zero(val.rows(), val.cols());
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    for (const Var& in : inputs) {
        if (node(in).requires_grad) {
            n.requires_grad = true;
            break;
        }
    }
    if (n.requires_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {static_cast<int>(nodes_.size()) - 1};
}

void Tape::add_grad(Var v, const Matrix& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.has_grad) {
        n.grad += g;
    } else {
        n.grad = g;
        n.has_grad = true;
    }
}

void Tape::backward(Var root) {
    const Matrix& rv = value(root);
    if (rv.rows() != 1 || rv.cols() != 1) throw std::invalid_argument("backward: root must be 1x1");
    add_grad(root, Matrix::Ones(1, 1));
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.has_grad || !n.backward) continue;
        // Copy: the callback may append to other nodes' gradients only, never this one.
        const Matrix g = n.grad;
        n.backward(*this, g);
    }
}

void Tape::accumulate_param_grads(Gradients& acc) const {
    for (const Node& n : nodes_) {
        if (n.param_id >= 0 && n.has_grad) acc[static_cast<std::size_t>(n.param_id)] += n.grad;
    }
}

Var matmul(Tape& t, Var a, Var b) {
    const Matrix& A = t.value(a);
    const Matrix& B = t.value(b);
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Matrix out = A * B;
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) tp.add_grad(a, g * tp.value(b).transpose());
        if (tp.requires_grad(b)) tp.add_grad(b, tp.value(a).transpose() * g);
    });
}

Var matmul_t(Tape& t, Var a, Var b) {
    const Matrix& A = t.value(a);
    const Matrix& B = t.value(b);
    if (A.cols() != B.cols()) throw std::invalid_argument("matmul_t: inner dimension mismatch");
    Matrix out = A * B.transpose();
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) tp.add_grad(a, g * tp.value(b));
        if (tp.requires_grad(b)) tp.add_grad(b, g.transpose() * tp.value(a));
    });
}

Var transpose(Tape& t, Var a) {
    Matrix out = t.value(a).transpose();
    return t.record(std::move(out), {a},
                    [a](Tape& tp, const Matrix& g) { tp.add_grad(a, g.transpose()); });
}

Var add(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "add");
    Matrix out = t.value(a) + t.value(b);
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        tp.add_grad(a, g);
        tp.add_grad(b, g);
    });
}

Var sub(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "sub");
    Matrix out = t.value(a) - t.value(b);
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        tp.add_grad(a, g);
        tp.add_grad(b, -g);
    });
}

Var mul(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "mul");
    Matrix out = t.value(a).cwiseProduct(t.value(b));
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        if (tp.requires_grad(a)) tp.add_grad(a, g.cwiseProduct(tp.value(b)));
        if (tp.requires_grad(b)) tp.add_grad(b, g.cwiseProduct(tp.value(a)));
    });
}

Var div(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "div");
    Matrix out = t.value(a).cwiseQuotient(t.value(b));
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        const Matrix& B = tp.value(b);
        if (tp.requires_grad(a)) tp.add_grad(a, g.cwiseQuotient(B));
        if (tp.requires_grad(b)) {
            const Matrix& A = tp.value(a);
            tp.add_grad(b, -(g.cwiseProduct(A).cwiseQuotient(B.cwiseProduct(B))));
        }
    });
}

Var maximum(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "maximum");
    Matrix out = t.value(a).cwiseMax(t.value(b));
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        const Matrix& A = tp.value(a);
        const Matrix& B = tp.value(b);
        Matrix ga = Matrix::Zero(g.rows(), g.cols());
        Matrix gb = Matrix::Zero(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            if (A.data()[i] >= B.data()[i]) {
                ga.data()[i] = g.data()[i];
            } else {
                gb.data()[i] = g.data()[i];
            }
        }
        tp.add_grad(a, ga);
        tp.add_grad(b, gb);
    });
}

Var minimum(Tape& t, Var a, Var b) {
    require_same_shape(t.value(a), t.value(b), "minimum");
    Matrix out = t.value(a).cwiseMin(t.value(b));
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, const Matrix& g) {
        const Matrix& A = tp.value(a);
        const Matrix& B = tp.value(b);
        Matrix ga = Matrix::Zero(g.rows(), g.cols());
        Matrix gb = Matrix::Zero(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            if (A.data()[i] <= B.data()[i]) {
                ga.data()[i] = g.data()[i];
            } else {
                gb.data()[i] = g.data()[i];
            }
        }
        tp.add_grad(a, ga);
        tp.add_grad(b, gb);
    });
}

Var add_row(Tape& t, Var a, Var row) {
    const Matrix& A = t.value(a);
    const Matrix& R = t.value(row);
    if (R.rows() != 1 || R.cols() != A.cols()) throw std::invalid_argument("add_row: shape mismatch");
    Matrix out = A.rowwise() + R.row(0);
    return t.record(std::move(out), {a, row}, [a, row](Tape& tp, const Matrix& g) {
        tp.add_grad(a, g);
        if (tp.requires_grad(row)) tp.add_grad(row, g.colwise().sum());
    });
}

Var mul_col(Tape& t, Var a, Var col) {
    const Matrix& A = t.value(a);
    const Matrix& C = t.value(col);
    if (C.cols() != 1 || C.rows() != A.rows()) throw std::invalid_argument("mul_col: shape mismatch");
    Matrix out = A.array().colwise() * C.col(0).array();
    return t.record(std::move(out), {a, col}, [a, col](Tape& tp, const Matrix& g) {
        const Matrix& Cv = tp.value(col);
        if (tp.requires_grad(a)) {
            Matrix ga = g.array().colwise() * Cv.col(0).array();
            tp.add_grad(a, ga);
        }
        if (tp.requires_grad(col)) {
            Matrix gc = g.cwiseProduct(tp.value(a)).rowwise().sum();
            tp.add_grad(col, gc);
        }
    });
}

Var div_scalar(Tape& t, Var a, Var s) {
    const Matrix& S = t.value(s);
    if (S.rows() != 1 || S.cols() != 1) throw std::invalid_argument("div_scalar: divisor must be 1x1");
    const double d = S(0, 0);
    Matrix out = t.value(a) / d;
    return t.record(std::move(out), {a, s}, [a, s](Tape& tp, const Matrix& g) {
        const double dv = tp.value(s)(0, 0);
        if (tp.requires_grad(a)) tp.add_grad(a, g / dv);
        if (tp.requires_grad(s)) {
            Matrix gs(1, 1);
            gs(0, 0) = -g.cwiseProduct(tp.value(a)).sum() / (dv * dv);
            tp.add_grad(s, gs);
        }
    });
}

Var scale(Tape& t, Var a, double k) {
    Matrix out = t.value(a) * k;
    return t.record(std::move(out), {a}, [a, k](Tape& tp, const Matrix& g) { tp.add_grad(a, g * k); });
}

Var add_const(Tape& t, Var a, double k) {
    Matrix out = t.value(a).array() + k;
    return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) { tp.add_grad(a, g); });
}

Var relu(Tape& t, Var a) {
    Matrix out = t.value(a).cwiseMax(0.0);
    return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
        Matrix ga = (tp.value(a).array() > 0.0).select(g.array(), 0.0);
        tp.add_grad(a, ga);
    });
}

Var clamp_min(Tape& t, Var a, double lo) {
    Matrix out = t.value(a).cwiseMax(lo);
    return t.record(std::move(out), {a}, [a, lo](Tape& tp, const Matrix& g) {
        Matrix ga = (tp.value(a).array() > lo).select(g.array(), 0.0);
        tp.add_grad(a, ga);
    });
}

Var sigmoid(Tape& t, Var a) {
    Matrix out = t.value(a).unaryExpr([](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    });
    const int self = static_cast<int>(t.size());
    return t.record(std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
        const Matrix& y = tp.value(Var{self});
        Matrix ga = g.array() * y.array() * (1.0 - y.array());
        tp.add_grad(a, ga);
    });
}

Var abs(Tape& t, Var a) {
    Matrix out = t.value(a).cwiseAbs();
    return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
        Matrix ga = g.array() * tp.value(a).array().sign();
        tp.add_grad(a, ga);
    });
}

Var softmax_rows(Tape& t, Var a) {
    const Matrix& A = t.value(a);
    Matrix out(A.rows(), A.cols());
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        const double m = A.row(r).maxCoeff();
        out.row(r) = (A.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    const int self = static_cast<int>(t.size());
    return t.record(std::move(out), {a}, [a, self](Tape& tp, const Matrix& g) {
        const Matrix& y = tp.value(Var{self});
        Matrix ga(y.rows(), y.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double dot = g.row(r).dot(y.row(r));
            ga.row(r) = y.row(r).array() * (g.row(r).array() - dot);
        }
        tp.add_grad(a, ga);
    });
}

Var layer_norm(Tape& t, Var a, Var gamma, Var beta, double eps) {
    const Matrix& A = t.value(a);
    const Matrix& G = t.value(gamma);
    const Matrix& B = t.value(beta);
    const Eigen::Index n = A.cols();
    if (G.rows() != 1 || G.cols() != n || B.rows() != 1 || B.cols() != n) {
        throw std::invalid_argument("layer_norm: gamma/beta shape mismatch");
    }
    Matrix xhat(A.rows(), n);
    Eigen::VectorXd inv_std(A.rows());
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        const double mu = A.row(r).mean();
        const double var = (A.row(r).array() - mu).square().mean();
        inv_std(r) = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (A.row(r).array() - mu) * inv_std(r);
    }
    Matrix out = (xhat.array().rowwise() * G.row(0).array()).rowwise() + B.row(0).array();
    return t.record(std::move(out), {a, gamma, beta},
                    [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                        Tape& tp, const Matrix& g) {
                        const Matrix& Gv = tp.value(gamma);
                        if (tp.requires_grad(beta)) tp.add_grad(beta, g.colwise().sum());
                        if (tp.requires_grad(gamma)) tp.add_grad(gamma, g.cwiseProduct(xhat).colwise().sum());
                        if (tp.requires_grad(a)) {
                            Matrix dxhat = g.array().rowwise() * Gv.row(0).array();
                            Matrix ga(g.rows(), g.cols());
                            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                                const double m1 = dxhat.row(r).mean();
                                const double m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<double>(g.cols());
                                ga.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                            }
                            tp.add_grad(a, ga);
                        }
                    });
}

Var l2_normalize_rows(Tape& t, Var a, double eps) {
    const Matrix& A = t.value(a);
    Eigen::VectorXd norms(A.rows());
    Matrix out(A.rows(), A.cols());
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
        norms(r) = std::sqrt(A.row(r).squaredNorm() + eps);
        out.row(r) = A.row(r) / norms(r);
    }
    const int self = static_cast<int>(t.size());
    return t.record(std::move(out), {a}, [a, self, norms = std::move(norms)](Tape& tp, const Matrix& g) {
        const Matrix& y = tp.value(Var{self});
        Matrix ga(y.rows(), y.cols());
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double dot = g.row(r).dot(y.row(r));
            ga.row(r) = (g.row(r) - y.row(r) * dot) / norms(r);
        }
        tp.add_grad(a, ga);
    });
}

Var mean_rows(Tape& t, Var a) {
    const Matrix& A = t.value(a);
    Matrix out = A.colwise().mean();
    const auto rows = A.rows();
    return t.record(std::move(out), {a}, [a, rows](Tape& tp, const Matrix& g) {
        Matrix ga = g.replicate(rows, 1) / static_cast<double>(rows);
        tp.add_grad(a, ga);
    });
}

Var sum(Tape& t, Var a) {
    const Matrix& A = t.value(a);
    Matrix out(1, 1);
    out(0, 0) = A.sum();
    const auto r = A.rows();
    const auto c = A.cols();
    return t.record(std::move(out), {a}, [a, r, c](Tape& tp, const Matrix& g) {
        tp.add_grad(a, Matrix::Constant(r, c, g(0, 0)));
    });
}

Var mean(Tape& t, Var a) {
    const double n = static_cast<double>(t.value(a).size());
    return scale(t, sum(t, a), 1.0 / n);
}

Var max_all(Tape& t, Var a) {
    const Matrix& A = t.value(a);
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    Matrix out(1, 1);
    out(0, 0) = A.maxCoeff(&r, &c);
    const auto rows = A.rows();
    const auto cols = A.cols();
    return t.record(std::move(out), {a}, [a, r, c, rows, cols](Tape& tp, const Matrix& g) {
        Matrix ga = Matrix::Zero(rows, cols);
        ga(r, c) = g(0, 0);
        tp.add_grad(a, ga);
    });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const auto cols = t.value(parts[0]).cols();
    Eigen::Index rows = 0;
    std::vector<Eigen::Index> offsets;
    for (const Var& p : parts) {
        if (t.value(p).cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        offsets.push_back(rows);
        rows += t.value(p).rows();
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out.middleRows(offsets[i], t.value(parts[i]).rows()) = t.value(parts[i]);
    }
    std::vector<Var> ins(parts.begin(), parts.end());
    return t.record(std::move(out), parts, [ins, offsets](Tape& tp, const Matrix& g) {
        for (std::size_t i = 0; i < ins.size(); ++i) {
            if (!tp.requires_grad(ins[i])) continue;
            tp.add_grad(ins[i], g.middleRows(offsets[i], tp.value(ins[i]).rows()));
        }
    });
}

Var slice_rows(Tape& t, Var a, int start, int count) {
    const Matrix& A = t.value(a);
    if (start < 0 || count < 0 || start + count > A.rows()) throw std::out_of_range("slice_rows");
    Matrix out = A.middleRows(start, count);
    const auto rows = A.rows();
    const auto cols = A.cols();
    return t.record(std::move(out), {a}, [a, start, count, rows, cols](Tape& tp, const Matrix& g) {
        Matrix ga = Matrix::Zero(rows, cols);
        ga.middleRows(start, count) = g;
        tp.add_grad(a, ga);
    });
}

Var slice_cols(Tape& t, Var a, int start, int count) {
    const Matrix& A = t.value(a);
    if (start < 0 || count < 0 || start + count > A.cols()) throw std::out_of_range("slice_cols");
    Matrix out = A.middleCols(start, count);
    const auto rows = A.rows();
    const auto cols = A.cols();
    return t.record(std::move(out), {a}, [a, start, count, rows, cols](Tape& tp, const Matrix& g) {
        Matrix ga = Matrix::Zero(rows, cols);
        ga.middleCols(start, count) = g;
        tp.add_grad(a, ga);
    });
}

Var im2col(Tape& t, Var a, int h, int w, int k, int stride, int pad) {
    const Matrix& A = t.value(a);
    if (A.rows() != static_cast<Eigen::Index>(h) * w) throw std::invalid_argument("im2col: bad map size");
    const int C = static_cast<int>(A.cols());
    const int ho = (h + 2 * pad - k) / stride + 1;
    const int wo = (w + 2 * pad - k) / stride + 1;
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(ho) * wo, static_cast<Eigen::Index>(k) * k * C);
    for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
            const Eigen::Index row = static_cast<Eigen::Index>(oy) * wo + ox;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride + ky - pad;
                if (iy < 0 || iy >= h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride + kx - pad;
                    if (ix < 0 || ix >= w) continue;
                    out.row(row).segment(static_cast<Eigen::Index>(ky * k + kx) * C, C) =
                        A.row(static_cast<Eigen::Index>(iy) * w + ix);
                }
            }
        }
    }
    return t.record(std::move(out), {a}, [a, h, w, k, stride, pad, C, ho, wo](Tape& tp, const Matrix& g) {
        Matrix ga = Matrix::Zero(static_cast<Eigen::Index>(h) * w, C);
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                const Eigen::Index row = static_cast<Eigen::Index>(oy) * wo + ox;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        ga.row(static_cast<Eigen::Index>(iy) * w + ix) +=
                            g.row(row).segment(static_cast<Eigen::Index>(ky * k + kx) * C, C);
                    }
                }
            }
        }
        tp.add_grad(a, ga);
    });
}

Var cross_entropy(Tape& t, Var logits, int label) {
    const Matrix& Z = t.value(logits);
    if (Z.rows() != 1 || label < 0 || label >= Z.cols()) {
        throw std::invalid_argument("cross_entropy: bad logits shape or label");
    }
    const double m = Z.maxCoeff();
    Matrix p = (Z.array() - m).exp();
    const double s = p.sum();
    p /= s;
    Matrix out(1, 1);
    out(0, 0) = m + std::log(s) - Z(0, label);
    return t.record(std::move(out), {logits}, [logits, label, p = std::move(p)](Tape& tp, const Matrix& g) {
        Matrix gz = p;
        gz(0, label) -= 1.0;
        tp.add_grad(logits, gz * g(0, 0));
    });
}

Var bce_with_logits(Tape& t, Var logit, double target) {
    const Matrix& Z = t.value(logit);
    if (Z.rows() != 1 || Z.cols() != 1) throw std::invalid_argument("bce_with_logits: logit must be 1x1");
    const double z = Z(0, 0);
    Matrix out(1, 1);
    out(0, 0) = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
    return t.record(std::move(out), {logit}, [logit, target](Tape& tp, const Matrix& g) {
        const double zz = tp.value(logit)(0, 0);
        const double s = zz >= 0.0 ? 1.0 / (1.0 + std::exp(-zz)) : std::exp(zz) / (1.0 + std::exp(zz));
        Matrix gz(1, 1);
        gz(0, 0) = (s - target) * g(0, 0);
        tp.add_grad(logit, gz);
    });
}

}  // namespace exitrack::nn
