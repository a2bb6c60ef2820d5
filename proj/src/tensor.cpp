#include "dunmri/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace dunmri {

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("non-positive dimension in shape " + shape_str(shape));
        n *= static_cast<size_t>(d);
    }
    return n;
}

Tensor Tensor::zeros(std::vector<int> shape, Dtype dt) {
    Tensor t;
    size_t n = shape_numel(shape) * dtype_width(dt);
    t.shape_ = std::move(shape);
    t.dtype_ = dt;
    t.data_ = std::make_shared<std::vector<double>>(n, 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, Dtype dt) {
    Tensor t = zeros(std::move(shape), dt);
    if (dt == Dtype::Real) {
        for (auto& v : *t.data_) v = value;
    } else {
        // fill real parts, leave imaginary zero
        for (size_t i = 0; i < t.data_->size(); i += 2) (*t.data_)[i] = value;
    }
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t = zeros({1}, Dtype::Real);
    (*t.data_)[0] = value;
    return t;
}

Tensor Tensor::from_buffer(std::vector<int> shape, Dtype dt, std::vector<double> buffer) {
    size_t expect = shape_numel(shape) * dtype_width(dt);
    if (buffer.size() != expect)
        throw std::invalid_argument("buffer length " + std::to_string(buffer.size()) +
                                    " does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.dtype_ = dt;
    t.data_ = std::make_shared<std::vector<double>>(std::move(buffer));
    return t;
}

size_t Tensor::numel() const { return shape_numel(shape_); }

Tensor Tensor::with_shape(std::vector<int> shape) const {
    if (shape_numel(shape) != numel())
        throw std::invalid_argument("with_shape: element count mismatch " + shape_str(shape_) +
                                    " -> " + shape_str(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
}

double Tensor::scalar_value() const {
    if (dtype_ != Dtype::Real || numel() != 1)
        throw std::invalid_argument("scalar_value requires a real tensor with one element, got " +
                                    shape_str(shape_));
    return (*data_)[0];
}

Tensor Tape::leaf(const Tensor& value) {
    Tensor t = value;
    t.tape_ = this;
    t.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{{}, t.buffer_size(), nullptr});
    return t;
}

void Tape::record(Tensor& result, std::vector<int> parents, BackwardFn fn) {
    result.tape_ = this;
    result.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(parents), result.buffer_size(), std::move(fn)});
}

std::vector<double>& Tape::grad_buf(int node) {
    auto& g = grads_[static_cast<size_t>(node)];
    if (g.empty()) g.assign(nodes_[static_cast<size_t>(node)].buf_size, 0.0);
    return g;
}

void Tape::backward(const Tensor& loss) {
    if (loss.tape() != this || loss.node() < 0)
        throw std::invalid_argument("backward: loss is not recorded on this tape");
    if (loss.dtype() != Dtype::Real || loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be a real scalar, got " +
                                    shape_str(loss.shape()));
    grads_.assign(nodes_.size(), {});
    grad_buf(loss.node())[0] = 1.0;
    for (int i = loss.node(); i >= 0; --i) {
        const auto& g = grads_[static_cast<size_t>(i)];
        if (g.empty()) continue;  // not on a path to the loss
        const auto& fn = nodes_[static_cast<size_t>(i)].backward;
        if (fn) fn(*this, g);
    }
}

const std::vector<double>* Tape::grad(const Tensor& t) const {
    if (t.tape() != this || t.node() < 0) return nullptr;
    const auto& g = grads_[static_cast<size_t>(t.node())];
    return g.empty() ? nullptr : &g;
}

std::vector<double> Tape::grad_or_zero(const Tensor& t) const {
    const auto* g = grad(t);
    if (g) return *g;
    return std::vector<double>(t.buffer_size(), 0.0);
}

}  // namespace dunmri
