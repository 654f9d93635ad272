#include "ser/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ser/error.hpp"

namespace ser {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const Tensor& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

// Allocates the output node; parents and backward_fn are only recorded when a
// gradient will ever be pulled through this op.
Tensor make_op(Shape shape, const std::vector<Tensor>& parents,
               std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values.assign(shape_numel(node->shape), 0.0);
    if (any_requires_grad(parents)) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor::wrap(std::move(node));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2) {
        throw ShapeError("matmul: operands must be 2-D, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                         " times " + shape_str(b.shape()));
    }
    Tensor out = make_op({m, n}, {a, b}, [m, k, n](Node& o) {
        Node& pa = *o.parents[0];
        Node& pb = *o.parents[1];
        if (pa.requires_grad) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = o.grad[i * n + j];
                    for (std::size_t l = 0; l < k; ++l)
                        pa.grad[i * k + l] += g * pb.values[l * n + j];
                }
        }
        if (pb.requires_grad) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = o.grad[i * n + j];
                    for (std::size_t l = 0; l < k; ++l)
                        pb.grad[l * n + j] += g * pa.values[i * k + l];
                }
        }
    });
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double ail = av[i * k + l];
            if (ail == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += ail * bv[l * n + j];
        }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const std::size_t n = a.numel();
    Tensor out = make_op(a.shape(), {a, b}, [n](Node& o) {
        Node& pa = *o.parents[0];
        Node& pb = *o.parents[1];
        if (pa.requires_grad)
            for (std::size_t i = 0; i < n; ++i) pa.grad[i] += o.grad[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < n; ++i) pb.grad[i] += o.grad[i];
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] + b.values()[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const std::size_t n = a.numel();
    Tensor out = make_op(a.shape(), {a, b}, [n](Node& o) {
        Node& pa = *o.parents[0];
        Node& pb = *o.parents[1];
        if (pa.requires_grad)
            for (std::size_t i = 0; i < n; ++i) pa.grad[i] += o.grad[i] * pb.values[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < n; ++i) pb.grad[i] += o.grad[i] * pa.values[i];
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = a.values()[i] * b.values()[i];
    return out;
}

Tensor tanh(const Tensor& x) {
    const std::size_t n = x.numel();
    Tensor out = make_op(x.shape(), {x}, [n](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = o.values[i];
            px.grad[i] += o.grad[i] * (1.0 - y * y);
        }
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::tanh(x.values()[i]);
    return out;
}

Tensor sigmoid(const Tensor& x) {
    const std::size_t n = x.numel();
    Tensor out = make_op(x.shape(), {x}, [n](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = o.values[i];
            px.grad[i] += o.grad[i] * y * (1.0 - y);
        }
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = 1.0 / (1.0 + std::exp(-x.values()[i]));
    return out;
}

Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        if (p.shape().size() != 1)
            throw ShapeError("concat: operands must be 1-D, got " + shape_str(p.shape()));
        total += p.numel();
    }
    Tensor out = make_op({total}, parts, [](Node& o) {
        std::size_t off = 0;
        for (auto& pp : o.parents) {
            Node& p = *pp;
            if (p.requires_grad)
                for (std::size_t i = 0; i < p.values.size(); ++i) p.grad[i] += o.grad[off + i];
            off += p.values.size();
        }
    });
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::copy(p.values().begin(), p.values().end(), out.values().begin() + off);
        off += p.numel();
    }
    return out;
}

Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }

Tensor slice(const Tensor& x, std::size_t offset, std::size_t len) {
    if (x.shape().size() != 1)
        throw ShapeError("slice: operand must be 1-D, got " + shape_str(x.shape()));
    if (offset + len > x.numel())
        throw ShapeError("slice: [" + std::to_string(offset) + ", " +
                         std::to_string(offset + len) + ") out of range for " +
                         shape_str(x.shape()));
    Tensor out = make_op({len}, {x}, [offset, len](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < len; ++i) px.grad[offset + i] += o.grad[i];
    });
    std::copy(x.values().begin() + offset, x.values().begin() + offset + len,
              out.values().begin());
    return out;
}

Tensor row(const Tensor& x, std::size_t r) {
    if (x.shape().size() != 2)
        throw ShapeError("row: operand must be 2-D, got " + shape_str(x.shape()));
    if (r >= x.dim(0)) throw ShapeError("row: index " + std::to_string(r) + " out of range");
    const std::size_t d = x.dim(1);
    Tensor out = make_op({d}, {x}, [r, d](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < d; ++i) px.grad[r * d + i] += o.grad[i];
    });
    std::copy(x.values().begin() + r * d, x.values().begin() + (r + 1) * d,
              out.values().begin());
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
    const std::size_t n = x.numel();
    Tensor out = make_op(std::move(shape), {x}, [n](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) px.grad[i] += o.grad[i];
    });
    out.values() = x.values();
    return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows, std::size_t total_rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    if (rows.size() > total_rows)
        throw ShapeError("stack_rows: " + std::to_string(rows.size()) + " rows exceed " +
                         std::to_string(total_rows));
    const std::size_t d = rows.front().numel();
    for (const Tensor& rw : rows) {
        if (rw.shape().size() != 1 || rw.numel() != d)
            throw ShapeError("stack_rows: rows must be 1-D of equal length");
    }
    Tensor out = make_op({total_rows, d}, rows, [d](Node& o) {
        for (std::size_t r = 0; r < o.parents.size(); ++r) {
            Node& p = *o.parents[r];
            if (!p.requires_grad) continue;
            for (std::size_t i = 0; i < d; ++i) p.grad[i] += o.grad[r * d + i];
        }
    });
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(rows[r].values().begin(), rows[r].values().end(),
                  out.values().begin() + r * d);
    }
    return out;
}

Tensor softmax(const Tensor& x, const std::vector<bool>* mask) {
    if (x.shape().size() != 1)
        throw ShapeError("softmax: operand must be 1-D, got " + shape_str(x.shape()));
    const std::size_t n = x.numel();
    if (n == 0) throw ShapeError("softmax: empty input");
    if (mask && mask->size() != n)
        throw ShapeError("softmax: mask length " + std::to_string(mask->size()) +
                         " != input length " + std::to_string(n));
    std::vector<bool> keep(n, true);
    if (mask) keep = *mask;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any = any || keep[i];
    if (!any) throw ValidationError("softmax: all positions masked");

    Tensor out = make_op({n}, {x}, [n, keep](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (keep[i]) dot += o.grad[i] * o.values[i];
        for (std::size_t i = 0; i < n; ++i)
            if (keep[i]) px.grad[i] += o.values[i] * (o.grad[i] - dot);
    });

    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) mx = std::max(mx, x.values()[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) {
            out.values()[i] = std::exp(x.values()[i] - mx);
            z += out.values()[i];
        } else {
            out.values()[i] = 0.0;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) out.values()[i] /= z;
    return out;
}

Tensor sum(const Tensor& x) {
    const std::size_t n = x.numel();
    Tensor out = make_op({1}, {x}, [n](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) px.grad[i] += o.grad[0];
    });
    double s = 0.0;
    for (double v : x.values()) s += v;
    out.values()[0] = s;
    return out;
}

Tensor scale(const Tensor& x, double c) {
    const std::size_t n = x.numel();
    Tensor out = make_op(x.shape(), {x}, [n, c](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) px.grad[i] += o.grad[i] * c;
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = x.values()[i] * c;
    return out;
}

Tensor log_clamped(const Tensor& x, double floor) {
    const std::size_t n = x.numel();
    Tensor out = make_op(x.shape(), {x}, [n, floor](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) {
            if (px.values[i] > floor) px.grad[i] += o.grad[i] / px.values[i];
        }
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = std::log(std::max(x.values()[i], floor));
    return out;
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ValidationError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return x;

    const std::size_t n = x.numel();
    std::vector<double> mult(n);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n; ++i) mult[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;

    Tensor out = make_op(x.shape(), {x}, [n, mult](Node& o) {
        Node& px = *o.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < n; ++i) px.grad[i] += o.grad[i] * mult[i];
    });
    for (std::size_t i = 0; i < n; ++i) out.values()[i] = x.values()[i] * mult[i];
    return out;
}

Tensor embed(const Tensor& table, const std::vector<int>& ids) {
    if (table.shape().size() != 2)
        throw ShapeError("embed: table must be 2-D, got " + shape_str(table.shape()));
    const std::size_t v = table.dim(0), d = table.dim(1);
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= v)
            throw DataError("embed: token id " + std::to_string(id) +
                            " out of range for vocabulary of size " + std::to_string(v));
    }
    const std::vector<int> ids_copy = ids;
    Tensor out = make_op({ids.size(), d}, {table}, [d, ids_copy](Node& o) {
        Node& pt = *o.parents[0];
        if (!pt.requires_grad) return;
        for (std::size_t t = 0; t < ids_copy.size(); ++t) {
            const int id = ids_copy[t];
            if (id == 0) continue;  // PAD row stays zero
            for (std::size_t i = 0; i < d; ++i)
                pt.grad[id * d + i] += o.grad[t * d + i];
        }
    });
    for (std::size_t t = 0; t < ids.size(); ++t) {
        const int id = ids[t];
        if (id == 0) continue;
        std::copy(table.values().begin() + id * d, table.values().begin() + (id + 1) * d,
                  out.values().begin() + t * d);
    }
    return out;
}

}  // namespace ser
