#include "mtbr/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "mtbr/errors.hpp"

namespace mtbr {

namespace {

// C[m×n] (+)= A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m×k] += G[m×n] · B[k×n]ᵀ
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b + p * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            c[i * k + p] += acc;
        }
    }
}

// C[k×n] += A[m×k]ᵀ · G[m×n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw ContractError("variable is not attached to a tape");
    return *a.tape;
}

Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw ContractError("variables belong to different tapes");
    return tape_of(a);
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a rank-2 operand, got " +
                             shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

bool needs(Tape& t, std::size_t id) { return t.requires_grad(id); }

}  // namespace

const Tensor& Var::value() const { return tape_of(*this).value(id); }
Tensor& Var::grad() const { return tape_of(*this).grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    if (requires_grad) n.grad = Tensor(value.shape());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardRule rule) {
    for (auto in : inputs) {
        if (in >= nodes_.size()) throw ContractError("operation input recorded after its consumer");
    }
    Node n;
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](std::size_t in) { return nodes_[in].requires_grad; });
    if (n.requires_grad) {
        n.grad = Tensor(value.shape());
        n.rule = std::move(rule);
    }
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

void Tape::zero_grad() {
    for (auto& n : nodes_) {
        if (n.requires_grad) n.grad.fill(0.0);
    }
}

void Tape::backward(Var loss) {
    if (loss.tape != this || loss.id >= nodes_.size()) {
        throw ContractError("backward: loss was not produced on this tape");
    }
    if (nodes_[loss.id].value.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(nodes_[loss.id].value.shape()));
    }
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad[0] += 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        auto& n = nodes_[id];
        if (n.requires_grad && n.rule) n.rule(*this, id);
    }
}

// --- primitives -----------------------------------------------------------

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank2(av, "matmul");
    require_rank2(bv, "matmul");
    if (av.dim(1) != bv.dim(0)) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(av.shape()) +
                             " · " + shape_str(bv.shape()));
    }
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    gemm_nn(av.data().data(), bv.data().data(), out.data().data(), m, k, n);
    return t.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id, m, k, n](Tape& t, std::size_t self) {
        const double* g = t.grad(self).data().data();
        if (needs(t, ia)) gemm_nt(g, t.value(ib).data().data(), t.grad(ia).data().data(), m, k, n);
        if (needs(t, ib)) gemm_tn(t.value(ia).data().data(), g, t.grad(ib).data().data(), m, k, n);
    });
}

Var dense(Var x, Var weight, Var bias) {
    Tape& t = same_tape(x, weight);
    same_tape(x, bias);
    const Tensor& xv = x.value();
    const Tensor& wv = weight.value();
    const Tensor& bv = bias.value();
    require_rank2(xv, "dense");
    require_rank2(wv, "dense");
    if (xv.dim(1) != wv.dim(0) || bv.rank() != 1 || bv.dim(0) != wv.dim(1)) {
        throw DimensionError("dense: incompatible shapes x" + shape_str(xv.shape()) + " W" +
                             shape_str(wv.shape()) + " bias" + shape_str(bv.shape()));
    }
    const std::size_t m = xv.dim(0), k = xv.dim(1), n = wv.dim(1);
    Tensor out({m, n});
    double* o = out.data().data();
    for (std::size_t i = 0; i < m; ++i) std::copy(bv.data().begin(), bv.data().end(), o + i * n);
    gemm_nn(xv.data().data(), wv.data().data(), o, m, k, n);
    return t.record(std::move(out), {x.id, weight.id, bias.id},
                    [ix = x.id, iw = weight.id, ib = bias.id, m, k, n](Tape& t, std::size_t self) {
                        const double* g = t.grad(self).data().data();
                        if (needs(t, ix))
                            gemm_nt(g, t.value(iw).data().data(), t.grad(ix).data().data(), m, k, n);
                        if (needs(t, iw))
                            gemm_tn(t.value(ix).data().data(), g, t.grad(iw).data().data(), m, k, n);
                        if (needs(t, ib)) {
                            double* gb = t.grad(ib).data().data();
                            for (std::size_t i = 0; i < m; ++i)
                                for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
                        }
                    });
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
    return t.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        for (auto in : {ia, ib}) {
            if (!needs(t, in)) continue;
            Tensor& gi = t.grad(in);
            for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
    return t.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (needs(t, ia)) {
            Tensor& ga = t.grad(ia);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (needs(t, ib)) {
            Tensor& gb = t.grad(ib);
            for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
    return t.record(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (needs(t, ia)) {
            Tensor& ga = t.grad(ia);
            const Tensor& bv = t.value(ib);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv[i];
        }
        if (needs(t, ib)) {
            Tensor& gb = t.grad(ib);
            const Tensor& av = t.value(ia);
            for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
        }
    });
}

Var scale(Var a, double s) {
    Tape& t = tape_of(a);
    Tensor out = a.value();
    for (auto& v : out.data()) v *= s;
    return t.record(std::move(out), {a.id}, [ia = a.id, s](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(ia);
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat: no operands");
    Tape& t = tape_of(parts.front());
    const std::size_t rows = parts.front().value().rows();
    std::vector<std::size_t> widths, ids;
    std::size_t total = 0;
    for (const auto& p : parts) {
        same_tape(parts.front(), p);
        require_rank2(p.value(), "concat");
        if (p.value().dim(0) != rows) {
            throw DimensionError("concat: row count mismatch " + shape_str(parts.front().shape()) +
                                 " vs " + shape_str(p.shape()));
        }
        widths.push_back(p.value().dim(1));
        ids.push_back(p.id);
        total += widths.back();
    }
    Tensor out({rows, total});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < widths[k]; ++c) out.at(r, offset + c) = v.at(r, c);
        offset += widths[k];
    }
    return t.record(std::move(out), ids, [ids, widths, rows, total](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (needs(t, ids[k])) {
                Tensor& gk = t.grad(ids[k]);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c)
                        gk[r * widths[k] + c] += g[r * total + offset + c];
            }
            offset += widths[k];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no operands");
    Tape& t = tape_of(parts.front());
    const std::size_t cols = parts.front().value().cols();
    std::vector<std::size_t> ids, sizes;
    std::size_t rows = 0;
    std::vector<double> data;
    for (const auto& p : parts) {
        same_tape(parts.front(), p);
        require_rank2(p.value(), "concat_rows");
        if (p.value().dim(1) != cols) {
            throw DimensionError("concat_rows: column count mismatch " +
                                 shape_str(parts.front().shape()) + " vs " + shape_str(p.shape()));
        }
        rows += p.value().dim(0);
        ids.push_back(p.id);
        sizes.push_back(p.value().numel());
        data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    }
    return t.record(Tensor({rows, cols}, std::move(data)), ids, [ids, sizes](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (needs(t, ids[k])) {
                Tensor& gk = t.grad(ids[k]);
                for (std::size_t i = 0; i < sizes[k]; ++i) gk[i] += g[offset + i];
            }
            offset += sizes[k];
        }
    });
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank2(xv, "slice_cols");
    if (count == 0 || start + count > xv.dim(1)) {
        throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") out of range for " +
                             shape_str(xv.shape()));
    }
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor out({rows, count});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < count; ++c) out.at(r, c) = xv.at(r, start + c);
    return t.record(std::move(out), {x.id}, [ix = x.id, start, count, rows, cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(ix);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < count; ++c) gx[r * cols + start + c] += g[r * count + c];
    });
}

Var row_scale(Var x, Var s) {
    Tape& t = same_tape(x, s);
    const Tensor& xv = x.value();
    const Tensor& sv = s.value();
    require_rank2(xv, "row_scale");
    if (sv.rank() != 2 || sv.dim(0) != xv.dim(0) || sv.dim(1) != 1) {
        throw DimensionError("row_scale: scale must be [" + std::to_string(xv.dim(0)) +
                             "x1], got " + shape_str(sv.shape()));
    }
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor out = xv;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(r, c) *= sv[r];
    return t.record(std::move(out), {x.id, s.id}, [ix = x.id, is = s.id, rows, cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(ix);
        const Tensor& sv = t.value(is);
        if (needs(t, ix)) {
            Tensor& gx = t.grad(ix);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * sv[r];
        }
        if (needs(t, is)) {
            Tensor& gs = t.grad(is);
            for (std::size_t r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < cols; ++c) acc += g[r * cols + c] * xv[r * cols + c];
                gs[r] += acc;
            }
        }
    });
}

Var mean(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    double acc = 0.0;
    for (double v : xv.data()) acc += v;
    const double n = static_cast<double>(xv.numel());
    return t.record(Tensor::scalar(acc / n), {x.id}, [ix = x.id, n](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] / n;
        for (auto& v : t.grad(ix).data()) v += g;
    });
}

Var mean_rows(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank2(xv, "mean_rows");
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor out({1, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c] += xv.at(r, c);
    for (auto& v : out.data()) v /= static_cast<double>(rows);
    return t.record(std::move(out), {x.id}, [ix = x.id, rows, cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(ix);
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[c] * inv;
    });
}

Var relu(Var x) {
    Tape& t = tape_of(x);
    Tensor out = x.value();
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return t.record(std::move(out), {x.id}, [ix = x.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(ix);
        Tensor& gx = t.grad(ix);
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (xv[i] > 0.0) gx[i] += g[i];
    });
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Var sigmoid(Var x) {
    Tape& t = tape_of(x);
    Tensor out = x.value();
    for (auto& v : out.data()) v = sigmoid_scalar(v);
    return t.record(std::move(out), {x.id}, [ix = x.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad(ix);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

void softmax_row(std::span<const double> in, std::span<double> out) {
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = std::exp(in[i] - mx);
        total += out[i];
    }
    for (std::size_t i = 0; i < in.size(); ++i) out[i] /= total;
}

Var softmax(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank2(xv, "softmax");
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor out({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        softmax_row(xv.data().subspan(r * cols, cols), out.data().subspan(r * cols, cols));
    }
    return t.record(std::move(out), {x.id}, [ix = x.id, rows, cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& s = t.value(self);
        Tensor& gx = t.grad(ix);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * s[r * cols + c];
            for (std::size_t c = 0; c < cols; ++c)
                gx[r * cols + c] += s[r * cols + c] * (g[r * cols + c] - dot);
        }
    });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    Tape& t = same_tape(x, gamma);
    same_tape(x, beta);
    const Tensor& xv = x.value();
    require_rank2(xv, "layer_norm");
    const std::size_t rows = xv.dim(0), d = xv.dim(1);
    if (d < 2) throw DimensionError("layer_norm: need at least 2 features, got " + shape_str(xv.shape()));
    if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    if (gv.rank() != 1 || gv.dim(0) != d || bv.shape() != gv.shape()) {
        throw DimensionError("layer_norm: affine shapes " + shape_str(gv.shape()) + "/" +
                             shape_str(bv.shape()) + " do not match feature width " +
                             std::to_string(d));
    }
    Tensor normed({rows, d});
    std::vector<double> inv_std(rows);
    Tensor out({rows, d});
    for (std::size_t r = 0; r < rows; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < d; ++c) mu += xv.at(r, c);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t c = 0; c < d; ++c) var += (xv.at(r, c) - mu) * (xv.at(r, c) - mu);
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            normed.at(r, c) = (xv.at(r, c) - mu) * inv_std[r];
            out.at(r, c) = gv[c] * normed.at(r, c) + bv[c];
        }
    }
    return t.record(std::move(out), {x.id, gamma.id, beta.id},
                    [ix = x.id, ig = gamma.id, ib = beta.id, rows, d, normed = std::move(normed),
                     inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                        const Tensor& g = t.grad(self);
                        if (needs(t, ig) || needs(t, ib)) {
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < d; ++c) {
                                    if (needs(t, ig)) t.grad(ig)[c] += g[r * d + c] * normed[r * d + c];
                                    if (needs(t, ib)) t.grad(ib)[c] += g[r * d + c];
                                }
                        }
                        if (!needs(t, ix)) return;
                        const Tensor& gv = t.value(ig);
                        Tensor& gx = t.grad(ix);
                        const double nd = static_cast<double>(d);
                        for (std::size_t r = 0; r < rows; ++r) {
                            double sum_dn = 0.0, sum_dn_n = 0.0;
                            for (std::size_t c = 0; c < d; ++c) {
                                const double dn = g[r * d + c] * gv[c];
                                sum_dn += dn;
                                sum_dn_n += dn * normed[r * d + c];
                            }
                            for (std::size_t c = 0; c < d; ++c) {
                                const double dn = g[r * d + c] * gv[c];
                                gx[r * d + c] += inv_std[r] *
                                                 (dn - sum_dn / nd - normed[r * d + c] * sum_dn_n / nd);
                            }
                        }
                    });
}

Var transpose(Var x) {
    Tape& t = tape_of(x);
    const Tensor& xv = x.value();
    require_rank2(xv, "transpose");
    const std::size_t rows = xv.dim(0), cols = xv.dim(1);
    Tensor out({cols, rows});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.at(c, r) = xv.at(r, c);
    return t.record(std::move(out), {x.id}, [ix = x.id, rows, cols](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(ix);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[c * rows + r];
    });
}

Var reshape(Var x, Shape shape) {
    Tape& t = tape_of(x);
    if (shape_numel(shape) != x.value().numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    Tensor out(std::move(shape), x.value().storage());
    return t.record(std::move(out), {x.id}, [ix = x.id](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gx = t.grad(ix);
        for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
    });
}

Var bce_loss(Var probs, const Tensor& targets) {
    Tape& t = tape_of(probs);
    const Tensor& p = probs.value();
    if (p.shape() != targets.shape()) {
        throw DimensionError("bce_loss: predictions " + shape_str(p.shape()) + " vs targets " +
                             shape_str(targets.shape()));
    }
    const double n = static_cast<double>(p.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
        const double pc = std::clamp(p[i], kBceEps, 1.0 - kBceEps);
        acc -= targets[i] * std::log(pc) + (1.0 - targets[i]) * std::log(1.0 - pc);
    }
    return t.record(Tensor::scalar(acc / n), {probs.id}, [ip = probs.id, targets, n](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor& p = t.value(ip);
        Tensor& gp = t.grad(ip);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            if (p[i] <= kBceEps || p[i] >= 1.0 - kBceEps) continue;
            gp[i] += g * (p[i] - targets[i]) / (p[i] * (1.0 - p[i])) / n;
        }
    });
}

// --- finite-difference checker --------------------------------------------

GradCheckResult grad_check(const LossFn& f, const std::vector<Tensor>& params, double h) {
    if (!(h > 0.0)) throw ContractError("grad_check: step must be positive");

    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& p : params) vars.push_back(tape.leaf(p));
        tape.backward(f(tape, vars));
        for (const auto& v : vars) analytic.push_back(v.grad());
    }

    auto evaluate = [&](const std::vector<Tensor>& ps) {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& p : ps) vars.push_back(tape.constant(p));
        return f(tape, vars).value()[0];
    };

    GradCheckResult result;
    std::vector<Tensor> probe = params;
    for (std::size_t k = 0; k < probe.size(); ++k) {
        for (std::size_t i = 0; i < probe[k].numel(); ++i) {
            const double orig = probe[k][i];
            probe[k][i] = orig + h;
            const double up = evaluate(probe);
            probe[k][i] = orig - h;
            const double down = evaluate(probe);
            probe[k][i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[k][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_rel_error) result = {rel, k, i};
        }
    }
    return result;
}

}  // namespace mtbr
