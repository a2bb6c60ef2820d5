#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dunmri {

enum class Dtype { Real, Complex };

// Doubles per logical element: 1 for real, 2 for interleaved re/im.
inline int dtype_width(Dtype d) { return d == Dtype::Complex ? 2 : 1; }

class Tape;

/// Dense n-dimensional array of doubles (real) or interleaved re/im pairs
/// (complex). Buffers are shared and treated as immutable once an op has
/// consumed the tensor; copies are cheap handles. A tensor optionally refers
/// to a node on a Tape, in which case gradients reach it during backward().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, Dtype dt = Dtype::Real);
    static Tensor full(std::vector<int> shape, double value, Dtype dt = Dtype::Real);
    static Tensor scalar(double value);  // shape {1}, real
    static Tensor from_buffer(std::vector<int> shape, Dtype dt, std::vector<double> buffer);

    const std::vector<int>& shape() const { return shape_; }
    Dtype dtype() const { return dtype_; }
    bool is_complex() const { return dtype_ == Dtype::Complex; }

    // Logical element count (complex pairs count once).
    size_t numel() const;
    // Raw buffer length in doubles.
    size_t buffer_size() const { return data_ ? data_->size() : 0; }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }
    const std::vector<double>& buffer() const { return *data_; }
    std::shared_ptr<std::vector<double>> shared_buffer() const { return data_; }

    bool defined() const { return static_cast<bool>(data_); }
    bool on_tape() const { return tape_ != nullptr && node_ >= 0; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    // Same buffer, different shape (element count must agree). Not recorded
    // on any tape; use ops::reshape for a differentiable view.
    Tensor with_shape(std::vector<int> shape) const;

    // Value copy detached from any tape (shares the buffer).
    Tensor detached() const;

    double scalar_value() const;  // requires real, numel 1

private:
    std::vector<int> shape_;
    Dtype dtype_ = Dtype::Real;
    std::shared_ptr<std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;

    friend class Tape;
};

std::string shape_str(const std::vector<int>& shape);
size_t shape_numel(const std::vector<int>& shape);

/// Records the forward computation as a flat list of nodes in creation order
/// (which is already a topological order). backward() walks the list once in
/// reverse, accumulating buffer-level gradients; complex tensors receive
/// gradients with respect to their real and imaginary parts independently,
/// which is the natural convention when every loss is real.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const std::vector<double>& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Register a value as a leaf (parameter or tracked input). Returns a
    /// handle to the same buffer that will collect gradients.
    Tensor leaf(const Tensor& value);

    /// Used by ops: create a node for `result`, with parent node ids and a
    /// backward rule. Parent id -1 means "constant input, skip".
    void record(Tensor& result, std::vector<int> parents, BackwardFn fn);

    /// Run reverse-mode accumulation from a real scalar loss on this tape.
    /// May be called repeatedly; gradients are recomputed from scratch.
    void backward(const Tensor& loss);

    /// Gradient buffer of a leaf/node after backward(); nullptr if the node
    /// was never reached.
    const std::vector<double>* grad(const Tensor& t) const;
    std::vector<double> grad_or_zero(const Tensor& t) const;

    /// Gradient accumulation target for `node` during backward.
    std::vector<double>& grad_buf(int node);

    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        std::vector<int> parents;
        size_t buf_size = 0;
        BackwardFn backward;  // empty for leaves
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
};

}  // namespace dunmri
