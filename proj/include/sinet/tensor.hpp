#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sinet/common.hpp"

namespace sinet {

class Tape;

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w) + ")";
    }
};

// Dense N x C x H x W tensor, row-major. Values are immutable once wrapped in
// a Tensor; ops never mutate inputs, so copies are cheap shared views.
// A tensor optionally carries a handle (tape, node) into the differentiation
// tape that produced it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(int n, int c, int h, int w) {
        return wrap_unchecked({n, c, h, w},
                              std::vector<Real>(Shape{n, c, h, w}.numel(), Real(0)));
    }

    static Tensor full(int n, int c, int h, int w, Real value) {
        require(is_finite(value), ErrorKind::Validation, "tensor fill value must be finite");
        return wrap_unchecked({n, c, h, w},
                              std::vector<Real>(Shape{n, c, h, w}.numel(), value));
    }

    static Tensor scalar(Real value) { return full(1, 1, 1, 1, value); }

    // Public ingestion point: always validates finiteness.
    static Tensor from_data(Shape shape, std::vector<Real> values) {
        check_shape(shape, values.size());
        for (Real v : values) {
            require(is_finite(v), ErrorKind::Validation,
                    "non-finite value in tensor data " + shape.str());
        }
        return wrap_unchecked(shape, std::move(values));
    }

    // Internal op results: finiteness verified post-op in debug mode only.
    static Tensor wrap(Shape shape, std::vector<Real> values) {
        check_shape(shape, values.size());
#ifndef SINET_NO_FINITE_CHECKS
        for (Real v : values) {
            require(is_finite(v), ErrorKind::Validation,
                    "non-finite value produced in tensor " + shape.str());
        }
#endif
        return wrap_unchecked(shape, std::move(values));
    }

    const Shape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t numel() const { return shape_.numel(); }
    bool empty() const { return !data_ || data_->empty(); }

    const std::vector<Real>& values() const { return *data_; }
    const Real* data() const { return data_->data(); }

    Real at(int n, int c, int y, int x) const {
        return (*data_)[offset(n, c, y, x)];
    }

    std::size_t offset(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    Real item() const {
        require(numel() == 1, ErrorKind::Shape,
                "item() requires a scalar tensor, got " + shape_.str());
        return (*data_)[0];
    }

    // --- differentiation handle -------------------------------------------
    bool tracked() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    Tensor detached() const {
        Tensor t = *this;
        t.tape_ = nullptr;
        t.node_ = -1;
        return t;
    }

    Tensor with_handle(Tape* tape, int node) const {
        Tensor t = *this;
        t.tape_ = tape;
        t.node_ = node;
        return t;
    }

private:
    static void check_shape(const Shape& shape, std::size_t count) {
        require(shape.n >= 0 && shape.c >= 0 && shape.h >= 0 && shape.w >= 0,
                ErrorKind::Shape, "negative tensor dimension " + shape.str());
        require(shape.numel() == count, ErrorKind::Shape,
                "data length " + std::to_string(count) + " does not match shape " + shape.str());
    }

    static Tensor wrap_unchecked(Shape shape, std::vector<Real> values) {
        Tensor t;
        t.shape_ = shape;
        t.data_ = std::make_shared<const std::vector<Real>>(std::move(values));
        return t;
    }

    Shape shape_;
    std::shared_ptr<const std::vector<Real>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

} // namespace sinet
