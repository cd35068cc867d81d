#include "recalign/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace recalign::ad {

const Mat& Tensor::value() const { return tape->value_of(id); }
const Mat& Tensor::grad() const { return tape->grad_of(id); }

Tensor Tape::push(Mat value, bool tracked, Backprop backprop) {
    Node n;
    n.value = std::move(value);
    n.tracked = tracked;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Tensor{this, nodes_.size() - 1};
}

Tensor Tape::leaf(Mat value) { return push(std::move(value), true, {}); }
Tensor Tape::constant(Mat value) { return push(std::move(value), false, {}); }

namespace {

void check_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeMismatch(std::string(what) + ": shapes differ");
}

} // namespace

Tensor Tape::matmul(Tensor a, Tensor b) {
    Mat out = recalign::matmul(a.value(), b.value());
    const std::size_t ia = a.id, ib = b.id;
    const bool tracked = is_tracked(ia) || is_tracked(ib);
    return push(std::move(out), tracked, [ia, ib](Tape& t, std::size_t out_id) {
        const Mat& g = t.grad_of(out_id);
        const Mat& av = t.value_of(ia);
        const Mat& bv = t.value_of(ib);
        if (t.is_tracked(ia)) { // dA += G B^T
            Mat& ga = t.grad_of(ia);
            for (std::size_t i = 0; i < av.rows; ++i)
                for (std::size_t j = 0; j < bv.cols; ++j) {
                    const double gij = g(i, j);
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < av.cols; ++k) ga(i, k) += gij * bv(k, j);
                }
        }
        if (t.is_tracked(ib)) { // dB += A^T G
            Mat& gb = t.grad_of(ib);
            for (std::size_t i = 0; i < av.rows; ++i)
                for (std::size_t k = 0; k < av.cols; ++k) {
                    const double aik = av(i, k);
                    if (aik == 0.0) continue;
                    for (std::size_t j = 0; j < bv.cols; ++j) gb(k, j) += aik * g(i, j);
                }
        }
    });
}

Tensor Tape::matmul_tn(Tensor a, Tensor b) {
    Mat out = recalign::matmul_tn(a.value(), b.value());
    const std::size_t ia = a.id, ib = b.id;
    const bool tracked = is_tracked(ia) || is_tracked(ib);
    return push(std::move(out), tracked, [ia, ib](Tape& t, std::size_t out_id) {
        // out = A^T B; dA += B G^T ; dB += A G
        const Mat& g = t.grad_of(out_id); // (a.cols x b.cols)
        const Mat& av = t.value_of(ia);   // (n x a.cols)
        const Mat& bv = t.value_of(ib);   // (n x b.cols)
        if (t.is_tracked(ia)) {
            Mat& ga = t.grad_of(ia);
            for (std::size_t n = 0; n < bv.rows; ++n)
                for (std::size_t i = 0; i < av.cols; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < bv.cols; ++j) acc += bv(n, j) * g(i, j);
                    ga(n, i) += acc;
                }
        }
        if (t.is_tracked(ib)) {
            Mat& gb = t.grad_of(ib);
            for (std::size_t n = 0; n < av.rows; ++n)
                for (std::size_t j = 0; j < bv.cols; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < av.cols; ++i) acc += av(n, i) * g(i, j);
                    gb(n, j) += acc;
                }
        }
    });
}

Tensor Tape::add(Tensor a, Tensor b) {
    check_same_shape(a.value(), b.value(), "add");
    Mat out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += b.value().v[i];
    const std::size_t ia = a.id, ib = b.id;
    const bool tracked = is_tracked(ia) || is_tracked(ib);
    return push(std::move(out), tracked, [ia, ib](Tape& t, std::size_t out_id) {
        const Mat& g = t.grad_of(out_id);
        if (t.is_tracked(ia)) {
            Mat& ga = t.grad_of(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
        }
        if (t.is_tracked(ib)) {
            Mat& gb = t.grad_of(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb.v[i] += g.v[i];
        }
    });
}

Tensor Tape::sub(Tensor a, Tensor b) {
    check_same_shape(a.value(), b.value(), "sub");
    Mat out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= b.value().v[i];
    const std::size_t ia = a.id, ib = b.id;
    const bool tracked = is_tracked(ia) || is_tracked(ib);
    return push(std::move(out), tracked, [ia, ib](Tape& t, std::size_t out_id) {
        const Mat& g = t.grad_of(out_id);
        if (t.is_tracked(ia)) {
            Mat& ga = t.grad_of(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
        }
        if (t.is_tracked(ib)) {
            Mat& gb = t.grad_of(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb.v[i] -= g.v[i];
        }
    });
}

Tensor Tape::mul(Tensor a, Tensor b) {
    check_same_shape(a.value(), b.value(), "mul");
    Mat out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= b.value().v[i];
    const std::size_t ia = a.id, ib = b.id;
    const bool tracked = is_tracked(ia) || is_tracked(ib);
    return push(std::move(out), tracked, [ia, ib](Tape& t, std::size_t out_id) {
        const Mat& g = t.grad_of(out_id);
        const Mat& av = t.value_of(ia);
        const Mat& bv = t.value_of(ib);
        if (t.is_tracked(ia)) {
            Mat& ga = t.grad_of(ia);
            for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * bv.v[i];
        }
        if (t.is_tracked(ib)) {
            Mat& gb = t.grad_of(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb.v[i] += g.v[i] * av.v[i];
        }
    });
}

Tensor Tape::scale(Tensor a, double c) {
    Mat out = a.value();
    for (double& x : out.v) x *= c;
    const std::size_t ia = a.id;
    return push(std::move(out), is_tracked(ia), [ia, c](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(ia)) return;
        const Mat& g = t.grad_of(out_id);
        Mat& ga = t.grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += c * g.v[i];
    });
}

Tensor Tape::add_rowvec(Tensor m, Tensor r) {
    const Mat& mv = m.value();
    const Mat& rv = r.value();
    if (rv.rows != 1 || rv.cols != mv.cols)
        throw ShapeMismatch("add_rowvec: need a 1 x cols row vector");
    Mat out = mv;
    for (std::size_t i = 0; i < mv.rows; ++i)
        for (std::size_t j = 0; j < mv.cols; ++j) out(i, j) += rv(0, j);
    const std::size_t im = m.id, ir = r.id;
    const bool tracked = is_tracked(im) || is_tracked(ir);
    return push(std::move(out), tracked, [im, ir](Tape& t, std::size_t out_id) {
        const Mat& g = t.grad_of(out_id);
        if (t.is_tracked(im)) {
            Mat& gm = t.grad_of(im);
            for (std::size_t i = 0; i < g.size(); ++i) gm.v[i] += g.v[i];
        }
        if (t.is_tracked(ir)) {
            Mat& gr = t.grad_of(ir);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) gr(0, j) += g(i, j);
        }
    });
}

Tensor Tape::sub_rowvec(Tensor m, Tensor r) {
    return add_rowvec(m, scale(r, -1.0));
}

Tensor Tape::relu(Tensor a) {
    Mat out = a.value();
    for (double x : out.v) min_abs_relu_ = std::min(min_abs_relu_, std::abs(x));
    for (double& x : out.v) x = x > 0.0 ? x : 0.0; // relu'(0) := 0
    const std::size_t ia = a.id;
    return push(std::move(out), is_tracked(ia), [ia](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(ia)) return;
        const Mat& g = t.grad_of(out_id);
        const Mat& av = t.value_of(ia);
        Mat& ga = t.grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (av.v[i] > 0.0) ga.v[i] += g.v[i];
    });
}

Tensor Tape::tanh_act(Tensor a) {
    Mat out = a.value();
    for (double& x : out.v) x = std::tanh(x);
    const std::size_t ia = a.id;
    return push(std::move(out), is_tracked(ia), [ia](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(ia)) return;
        const Mat& g = t.grad_of(out_id);
        const Mat& ov = t.value_of(out_id);
        Mat& ga = t.grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i)
            ga.v[i] += g.v[i] * (1.0 - ov.v[i] * ov.v[i]);
    });
}

Tensor Tape::exp_scale(Tensor a, double c) {
    Mat out = a.value();
    for (double& x : out.v) x = std::exp(c * x);
    const std::size_t ia = a.id;
    return push(std::move(out), is_tracked(ia), [ia, c](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(ia)) return;
        const Mat& g = t.grad_of(out_id);
        const Mat& ov = t.value_of(out_id);
        Mat& ga = t.grad_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * c * ov.v[i];
    });
}

Tensor Tape::pairwise_sqdist(Tensor a, Tensor b) {
    const Mat& av = a.value();
    const Mat& bv = b.value();
    if (av.cols != bv.cols) throw ShapeMismatch("pairwise_sqdist: feature widths differ");
    Mat out(av.rows, bv.rows);
    for (std::size_t i = 0; i < av.rows; ++i)
        for (std::size_t j = 0; j < bv.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < av.cols; ++k) {
                const double d = av(i, k) - bv(j, k);
                s += d * d;
            }
            out(i, j) = s;
        }
    const std::size_t ia = a.id, ib = b.id;
    const bool tracked = is_tracked(ia) || is_tracked(ib);
    return push(std::move(out), tracked, [ia, ib](Tape& t, std::size_t out_id) {
        const Mat& g = t.grad_of(out_id);
        const Mat& av = t.value_of(ia);
        const Mat& bv = t.value_of(ib);
        const bool ta = t.is_tracked(ia);
        const bool tb = t.is_tracked(ib);
        for (std::size_t i = 0; i < av.rows; ++i)
            for (std::size_t j = 0; j < bv.rows; ++j) {
                const double gij = g(i, j);
                if (gij == 0.0) continue;
                for (std::size_t k = 0; k < av.cols; ++k) {
                    const double d = 2.0 * gij * (av(i, k) - bv(j, k));
                    if (ta) t.grad_of(ia)(i, k) += d;
                    if (tb) t.grad_of(ib)(j, k) -= d;
                }
            }
    });
}

Tensor Tape::row_sum(Tensor m) {
    const Mat& mv = m.value();
    Mat out(mv.rows, 1);
    for (std::size_t i = 0; i < mv.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < mv.cols; ++j) s += mv(i, j);
        out(i, 0) = s;
    }
    const std::size_t im = m.id;
    return push(std::move(out), is_tracked(im), [im](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(im)) return;
        const Mat& g = t.grad_of(out_id);
        Mat& gm = t.grad_of(im);
        for (std::size_t i = 0; i < gm.rows; ++i)
            for (std::size_t j = 0; j < gm.cols; ++j) gm(i, j) += g(i, 0);
    });
}

Tensor Tape::col_mean(Tensor m) {
    const Mat& mv = m.value();
    if (mv.rows == 0) throw EmptyBatch("col_mean: empty matrix");
    Mat out(1, mv.cols, 0.0);
    for (std::size_t i = 0; i < mv.rows; ++i)
        for (std::size_t j = 0; j < mv.cols; ++j) out(0, j) += mv(i, j);
    const double inv_n = 1.0 / static_cast<double>(mv.rows);
    for (double& x : out.v) x *= inv_n;
    const std::size_t im = m.id;
    return push(std::move(out), is_tracked(im), [im, inv_n](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(im)) return;
        const Mat& g = t.grad_of(out_id);
        Mat& gm = t.grad_of(im);
        for (std::size_t i = 0; i < gm.rows; ++i)
            for (std::size_t j = 0; j < gm.cols; ++j) gm(i, j) += g(0, j) * inv_n;
    });
}

Tensor Tape::mean_all(Tensor m) {
    const Mat& mv = m.value();
    if (mv.size() == 0) throw EmptyBatch("mean_all: empty matrix");
    double s = 0.0;
    for (double x : mv.v) s += x;
    const double inv_n = 1.0 / static_cast<double>(mv.size());
    Mat out(1, 1, s * inv_n);
    const std::size_t im = m.id;
    return push(std::move(out), is_tracked(im), [im, inv_n](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(im)) return;
        const double g = t.grad_of(out_id).v[0] * inv_n;
        Mat& gm = t.grad_of(im);
        for (double& x : gm.v) x += g;
    });
}

Tensor Tape::sum_squares(Tensor m) {
    const Mat& mv = m.value();
    double s = 0.0;
    for (double x : mv.v) s += x * x;
    Mat out(1, 1, s);
    const std::size_t im = m.id;
    return push(std::move(out), is_tracked(im), [im](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(im)) return;
        const double g = t.grad_of(out_id).v[0];
        const Mat& mv = t.value_of(im);
        Mat& gm = t.grad_of(im);
        for (std::size_t i = 0; i < gm.size(); ++i) gm.v[i] += 2.0 * g * mv.v[i];
    });
}

Tensor Tape::softmax_rows(Tensor m) {
    const Mat& mv = m.value();
    Mat out(mv.rows, mv.cols);
    for (std::size_t i = 0; i < mv.rows; ++i) {
        double mx = mv(i, 0);
        for (std::size_t j = 1; j < mv.cols; ++j) mx = std::max(mx, mv(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < mv.cols; ++j) {
            out(i, j) = std::exp(mv(i, j) - mx);
            z += out(i, j);
        }
        for (std::size_t j = 0; j < mv.cols; ++j) out(i, j) /= z;
    }
    const std::size_t im = m.id;
    return push(std::move(out), is_tracked(im), [im](Tape& t, std::size_t out_id) {
        if (!t.is_tracked(im)) return;
        const Mat& g = t.grad_of(out_id);
        const Mat& p = t.value_of(out_id);
        Mat& gm = t.grad_of(im);
        for (std::size_t i = 0; i < p.rows; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < p.cols; ++j) dot += g(i, j) * p(i, j);
            for (std::size_t j = 0; j < p.cols; ++j)
                gm(i, j) += p(i, j) * (g(i, j) - dot);
        }
    });
}

Tensor Tape::pick_label(Tensor m, std::vector<int> labels) {
    const Mat& mv = m.value();
    if (labels.size() != mv.rows) throw ShapeMismatch("pick_label: label count != rows");
    Mat out(mv.rows, 1);
    for (std::size_t i = 0; i < mv.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= mv.cols)
            throw IndexOutOfRange("pick_label: label outside logit width");
        out(i, 0) = mv(i, static_cast<std::size_t>(y));
    }
    const std::size_t im = m.id;
    return push(std::move(out), is_tracked(im),
                [im, labels = std::move(labels)](Tape& t, std::size_t out_id) {
                    if (!t.is_tracked(im)) return;
                    const Mat& g = t.grad_of(out_id);
                    Mat& gm = t.grad_of(im);
                    for (std::size_t i = 0; i < g.rows; ++i)
                        gm(i, static_cast<std::size_t>(labels[i])) += g(i, 0);
                });
}

Tensor Tape::softmax_cross_entropy(Tensor logits, const std::vector<int>& labels) {
    const Mat& lv = logits.value();
    if (lv.rows == 0) throw EmptyBatch("softmax_cross_entropy: empty batch");
    if (labels.size() != lv.rows)
        throw ShapeMismatch("softmax_cross_entropy: label count != rows");
    Mat probs(lv.rows, lv.cols);
    double loss = 0.0;
    for (std::size_t i = 0; i < lv.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= lv.cols)
            throw IndexOutOfRange("softmax_cross_entropy: label outside logit width");
        double mx = lv(i, 0);
        for (std::size_t j = 1; j < lv.cols; ++j) mx = std::max(mx, lv(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < lv.cols; ++j) {
            probs(i, j) = std::exp(lv(i, j) - mx);
            z += probs(i, j);
        }
        for (std::size_t j = 0; j < lv.cols; ++j) probs(i, j) /= z;
        loss += -(lv(i, static_cast<std::size_t>(y)) - mx - std::log(z));
    }
    const double inv_n = 1.0 / static_cast<double>(lv.rows);
    Mat out(1, 1, loss * inv_n);
    const std::size_t il = logits.id;
    return push(std::move(out), is_tracked(il),
                [il, probs = std::move(probs), labels, inv_n](Tape& t, std::size_t out_id) {
                    if (!t.is_tracked(il)) return;
                    const double g = t.grad_of(out_id).v[0] * inv_n;
                    Mat& gl = t.grad_of(il);
                    for (std::size_t i = 0; i < probs.rows; ++i)
                        for (std::size_t j = 0; j < probs.cols; ++j) {
                            double d = probs(i, j);
                            if (static_cast<std::size_t>(labels[i]) == j) d -= 1.0;
                            gl(i, j) += g * d;
                        }
                });
}

void Tape::backward(Tensor loss) {
    if (loss.tape != this) throw Error("backward: tensor belongs to another tape");
    if (!value_of(loss.id).is_scalar()) throw NonScalarLoss("backward: loss is not 1x1");
    for (Node& n : nodes_) {
        if (n.tracked) {
            n.grad = Mat(n.value.rows, n.value.cols, 0.0);
        }
    }
    if (!nodes_[loss.id].tracked)
        nodes_[loss.id].grad = Mat(1, 1, 0.0); // constant loss: all grads stay zero
    nodes_[loss.id].grad.v[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.tracked && n.backprop) n.backprop(*this, i);
    }
}

} // namespace recalign::ad
