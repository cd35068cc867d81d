#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "recalign/mat.hpp"

// Minimal reverse-mode differentiation over dense rank-<=2 f64 tensors.
// A Tape owns the computation graph of one forward pass; backward() walks
// it in reverse creation order and accumulates gradients. Scalars are 1x1.
// A tape belongs to a single training run; runs never share tapes.

namespace recalign::ad {

class Tape;

// Handle to one node (value + optional gradient) on a tape.
struct Tensor {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Mat& value() const;
    const Mat& grad() const;
    std::size_t rows() const { return value().rows; }
    std::size_t cols() const { return value().cols; }
    double scalar() const { return value().scalar(); }
};

class Tape {
  public:
    // Leaf with gradient tracking (parameters).
    Tensor leaf(Mat value);
    // Leaf without gradient tracking (inputs, constants).
    Tensor constant(Mat value);

    Tensor matmul(Tensor a, Tensor b);
    Tensor matmul_tn(Tensor a, Tensor b); // a^T * b
    Tensor add(Tensor a, Tensor b);
    Tensor sub(Tensor a, Tensor b);
    Tensor mul(Tensor a, Tensor b); // elementwise
    Tensor scale(Tensor a, double c);
    Tensor add_rowvec(Tensor m, Tensor r); // r broadcast over the rows of m
    Tensor sub_rowvec(Tensor m, Tensor r);

    Tensor relu(Tensor a);
    Tensor tanh_act(Tensor a);
    Tensor exp_scale(Tensor a, double c); // exp(c * a), elementwise

    // D(i, j) = || a_i - b_j ||^2 over rows.
    Tensor pairwise_sqdist(Tensor a, Tensor b);

    Tensor row_sum(Tensor m);  // n x 1
    Tensor col_mean(Tensor m); // 1 x d
    Tensor mean_all(Tensor m); // 1 x 1
    Tensor sum_squares(Tensor m); // 1 x 1: sum of squared entries

    Tensor softmax_rows(Tensor m);
    // out(i, 0) = m(i, labels[i])
    Tensor pick_label(Tensor m, std::vector<int> labels);

    // Mean over the batch of -log softmax(logits)[label], in nats, with
    // max-subtraction for stability.
    Tensor softmax_cross_entropy(Tensor logits, const std::vector<int>& labels);

    // Populates gradients of every tracked node reachable from `loss`.
    // Throws NonScalarLoss unless loss is 1x1.
    void backward(Tensor loss);

    // Smallest |pre-activation| seen by any relu on this tape; +inf when no
    // relu ran. Used by the finite-difference checker to flag kink-adjacent
    // coordinates.
    double min_abs_relu_input() const { return min_abs_relu_; }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    friend struct Tensor;

    // backprop(tape, out_id): scatter d(loss)/d(out) into the inputs' grads.
    using Backprop = std::function<void(Tape&, std::size_t)>;

    struct Node {
        Mat value;
        Mat grad; // allocated by backward() for tracked nodes
        bool tracked = false;
        Backprop backprop; // empty for leaves
    };

    Tensor push(Mat value, bool tracked, Backprop backprop);
    Mat& grad_of(std::size_t id) { return nodes_[id].grad; }
    const Mat& value_of(std::size_t id) const { return nodes_[id].value; }
    bool is_tracked(std::size_t id) const { return nodes_[id].tracked; }

    std::vector<Node> nodes_;
    double min_abs_relu_ = std::numeric_limits<double>::infinity();
};

} // namespace recalign::ad
