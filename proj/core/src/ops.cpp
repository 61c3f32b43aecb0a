#include "san/ops.hpp"

#include <algorithm>
#include <cmath>

#include "san/log.hpp"

namespace san {

namespace {

using detail::Node;

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(strf("%s: shape mismatch: %s vs %s", op,
                                  shape_str(a.shape()).c_str(),
                                  shape_str(b.shape()).c_str()));
}

void check_finite(const char* op, const Tensor& x) {
    for (double v : x.value())
        if (!std::isfinite(v))
            throw NumericError(strf("%s: non-finite input", op));
}

// Lane geometry for softmax along an axis of a rank-1/2 tensor: `lanes` lanes
// of `len` entries each, entry k of lane l at offset lane_base + k * stride.
struct Lanes {
    std::size_t lanes, len, stride, lane_step;
};

Lanes lane_geometry(const char* op, const Tensor& x, std::size_t axis) {
    if (x.rank() == 1) {
        if (axis != 0)
            throw DimensionError(strf("%s: axis %zu out of range for rank-1",
                                      op, axis));
        return {1, x.dim(0), 1, 0};
    }
    if (x.rank() != 2)
        throw DimensionError(strf("%s: rank-1 or rank-2 tensor required", op));
    const std::size_t r = x.dim(0), c = x.dim(1);
    if (axis == 0) return {c, r, c, 1};  // each column is a lane
    if (axis == 1) return {r, c, 1, c};  // each row is a lane
    throw DimensionError(strf("%s: axis %zu out of range for rank-2", op, axis));
}

Tensor softmax_impl(Graph& g, const Tensor& x, std::size_t axis,
                    std::size_t valid, bool masked) {
    check_finite("softmax", x);
    const Lanes ln = lane_geometry("softmax", x, axis);
    const std::size_t v = masked ? valid : ln.len;
    if (v == 0 || v > ln.len)
        throw DimensionError(strf("softmax: valid length %zu out of range "
                                  "(lane length %zu)", v, ln.len));

    std::vector<double> out(x.size(), 0.0);
    const double* xv = x.value().data();
    for (std::size_t l = 0; l < ln.lanes; ++l) {
        const std::size_t base = l * ln.lane_step;
        double mx = xv[base];
        for (std::size_t k = 1; k < v; ++k)
            mx = std::max(mx, xv[base + k * ln.stride]);
        double denom = 0.0;
        for (std::size_t k = 0; k < v; ++k) {
            const double e = std::exp(xv[base + k * ln.stride] - mx);
            out[base + k * ln.stride] = e;
            denom += e;
        }
        for (std::size_t k = 0; k < v; ++k) out[base + k * ln.stride] /= denom;
    }

    return g.record(
        x.shape(), std::move(out), {x}, [ln, v](Node& self) {
            Node* p = self.parents[0].get();
            if (!p->requires_grad) return;
            p->ensure_grad();
            const double* y = self.value.data();
            const double* dy = self.grad.data();
            for (std::size_t l = 0; l < ln.lanes; ++l) {
                const std::size_t base = l * ln.lane_step;
                double dot = 0.0;
                for (std::size_t k = 0; k < v; ++k) {
                    const std::size_t i = base + k * ln.stride;
                    dot += dy[i] * y[i];
                }
                for (std::size_t k = 0; k < v; ++k) {
                    const std::size_t i = base + k * ln.stride;
                    p->grad[i] += y[i] * (dy[i] - dot);
                }
            }
        });
}

template <typename Fwd, typename Bwd>
Tensor unary_ew(Graph& g, const Tensor& x, Fwd fwd, Bwd bwd) {
    std::vector<double> out(x.size());
    const auto& xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
    return g.record(x.shape(), std::move(out), {x}, [bwd](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double* y = self.value.data();
        const double* xv2 = p->value.data();
        const double* dy = self.grad.data();
        for (std::size_t i = 0; i < self.value.size(); ++i)
            p->grad[i] += dy[i] * bwd(xv2[i], y[i]);
    });
}

}  // namespace

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw DimensionError(strf("matmul: rank-2 tensors required: %s vs %s",
                                  shape_str(a.shape()).c_str(),
                                  shape_str(b.shape()).c_str()));
    const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
    if (b.dim(0) != q)
        throw DimensionError(strf("matmul: inner dimensions disagree: %s vs %s",
                                  shape_str(a.shape()).c_str(),
                                  shape_str(b.shape()).c_str()));

    std::vector<double> out(p * r, 0.0);
    {
        const double* A = a.value().data();
        const double* B = b.value().data();
        for (std::size_t i = 0; i < p; ++i) {
            double* crow = out.data() + i * r;
            for (std::size_t k = 0; k < q; ++k) {
                const double aik = A[i * q + k];
                const double* brow = B + k * r;
                for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
            }
        }
    }

    return g.record({p, r}, std::move(out), {a, b}, [p, q, r](Node& self) {
        Node* pa = self.parents[0].get();
        Node* pb = self.parents[1].get();
        const double* dC = self.grad.data();
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double* B = pb->value.data();
            for (std::size_t i = 0; i < p; ++i) {
                const double* dcrow = dC + i * r;
                for (std::size_t k = 0; k < q; ++k) {
                    const double* brow = B + k * r;
                    double s = 0.0;
                    for (std::size_t j = 0; j < r; ++j) s += dcrow[j] * brow[j];
                    pa->grad[i * q + k] += s;
                }
            }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            const double* A = pa->value.data();
            for (std::size_t i = 0; i < p; ++i) {
                const double* dcrow = dC + i * r;
                for (std::size_t k = 0; k < q; ++k) {
                    const double aik = A[i * q + k];
                    if (aik == 0.0) continue;
                    double* dbrow = pb->grad.data() + k * r;
                    for (std::size_t j = 0; j < r; ++j)
                        dbrow[j] += aik * dcrow[j];
                }
            }
        }
    });
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(a.size());
    const auto& av = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return g.record(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (int s = 0; s < 2; ++s) {
            Node* p = self.parents[static_cast<std::size_t>(s)].get();
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                p->grad[i] += self.grad[i];
        }
    });
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    const auto& av = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return g.record(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node* pa = self.parents[0].get();
        Node* pb = self.parents[1].get();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    const auto& av = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return g.record(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node* pa = self.parents[0].get();
        Node* pb = self.parents[1].get();
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double* bv2 = pb->value.data();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * bv2[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            const double* av2 = pa->value.data();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * av2[i];
        }
    });
}

Tensor add_bias(Graph& g, const Tensor& m, const Tensor& bias) {
    if (m.rank() != 2 || bias.rank() != 1 || bias.dim(0) != m.dim(0))
        throw DimensionError(strf("add_bias: %s with bias %s",
                                  shape_str(m.shape()).c_str(),
                                  shape_str(bias.shape()).c_str()));
    const std::size_t r = m.dim(0), c = m.dim(1);
    std::vector<double> out(m.size());
    const auto& mv = m.value();
    const auto& bv = bias.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            out[i * c + j] = mv[i * c + j] + bv[i];
    return g.record(m.shape(), std::move(out), {m, bias}, [r, c](Node& self) {
        Node* pm = self.parents[0].get();
        Node* pb = self.parents[1].get();
        if (pm->requires_grad) {
            pm->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pm->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < c; ++j) s += self.grad[i * c + j];
                pb->grad[i] += s;
            }
        }
    });
}

Tensor scale(Graph& g, const Tensor& x, double c) {
    std::vector<double> out(x.size());
    const auto& xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * c;
    return g.record(x.shape(), std::move(out), {x}, [c](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p->grad[i] += self.grad[i] * c;
    });
}

Tensor add_const(Graph& g, const Tensor& x, double c) {
    std::vector<double> out(x.size());
    const auto& xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] + c;
    return g.record(x.shape(), std::move(out), {x}, [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p->grad[i] += self.grad[i];
    });
}

Tensor neg(Graph& g, const Tensor& x) { return scale(g, x, -1.0); }

Tensor relu(Graph& g, const Tensor& x) {
    return unary_ew(
        g, x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Graph& g, const Tensor& x) {
    return unary_ew(
        g, x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Graph& g, const Tensor& x) {
    return unary_ew(
        g, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor log(Graph& g, const Tensor& x) {
    for (double v : x.value())
        if (!(v > 0.0))
            throw NumericError("log: non-positive input");
    return unary_ew(
        g, x, [](double v) { return std::log(v); },
        [](double xv, double) { return 1.0 / xv; });
}

Tensor max2(Graph& g, const Tensor& a, const Tensor& b) {
    check_same_shape("max2", a, b);
    std::vector<double> out(a.size());
    std::vector<std::uint8_t> take_a(a.size());
    const auto& av = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        take_a[i] = av[i] >= bv[i];
        out[i] = take_a[i] ? av[i] : bv[i];
    }
    return g.record(a.shape(), std::move(out), {a, b},
                    [mask = std::move(take_a)](Node& self) {
                        Node* pa = self.parents[0].get();
                        Node* pb = self.parents[1].get();
                        if (pa->requires_grad) {
                            pa->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                                if (mask[i]) pa->grad[i] += self.grad[i];
                        }
                        if (pb->requires_grad) {
                            pb->ensure_grad();
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                                if (!mask[i]) pb->grad[i] += self.grad[i];
                        }
                    });
}

Tensor softmax(Graph& g, const Tensor& x, std::size_t axis) {
    return softmax_impl(g, x, axis, 0, false);
}

Tensor softmax_masked(Graph& g, const Tensor& x, std::size_t axis,
                      std::size_t valid) {
    return softmax_impl(g, x, axis, valid, true);
}

Tensor concat(Graph& g, const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    if (axis > 1) throw DimensionError("concat: axis out of range");

    const bool rank1 = parts[0].rank() == 1;
    if (rank1 && axis != 0) throw DimensionError("concat: axis out of range");

    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rank() != parts[0].rank())
            throw DimensionError("concat: mixed ranks");
        if (!rank1) {
            const std::size_t other = axis == 0 ? 1 : 0;
            if (p.dim(other) != parts[0].dim(other))
                throw DimensionError(strf("concat: shape mismatch: %s vs %s",
                                          shape_str(parts[0].shape()).c_str(),
                                          shape_str(p.shape()).c_str()));
        }
        total += rank1 ? p.dim(0) : p.dim(axis);
    }

    Shape out_shape;
    std::vector<double> out;
    std::vector<std::size_t> sizes;  // extent of each part along axis
    sizes.reserve(parts.size());

    if (rank1 || axis == 0) {
        // Row-stacking (or vector concat): blocks are contiguous.
        const std::size_t c = rank1 ? 1 : parts[0].dim(1);
        out_shape = rank1 ? Shape{total} : Shape{total, c};
        out.reserve(total * c);
        for (const auto& p : parts) {
            sizes.push_back(rank1 ? p.dim(0) : p.dim(0));
            out.insert(out.end(), p.value().begin(), p.value().end());
        }
    } else {
        const std::size_t r = parts[0].dim(0);
        out_shape = {r, total};
        out.assign(r * total, 0.0);
        std::size_t col = 0;
        for (const auto& p : parts) {
            const std::size_t pc = p.dim(1);
            sizes.push_back(pc);
            const auto& pv = p.value();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < pc; ++j)
                    out[i * total + col + j] = pv[i * pc + j];
            col += pc;
        }
    }

    return g.record(
        std::move(out_shape), std::move(out), parts,
        [axis, rank1, sizes = std::move(sizes), total](Node& self) {
            if (rank1 || axis == 0) {
                std::size_t off = 0;
                for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                    Node* p = self.parents[pi].get();
                    const std::size_t n = p->value.size();
                    if (p->requires_grad) {
                        p->ensure_grad();
                        for (std::size_t i = 0; i < n; ++i)
                            p->grad[i] += self.grad[off + i];
                    }
                    off += n;
                }
            } else {
                const std::size_t r = self.shape[0];
                std::size_t col = 0;
                for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
                    Node* p = self.parents[pi].get();
                    const std::size_t pc = sizes[pi];
                    if (p->requires_grad) {
                        p->ensure_grad();
                        for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < pc; ++j)
                                p->grad[i * pc + j] +=
                                    self.grad[i * total + col + j];
                    }
                    col += pc;
                }
            }
        });
}

Tensor slice(Graph& g, const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t end) {
    const bool rank1 = x.rank() == 1;
    if (x.rank() > 2) throw DimensionError("slice: rank-1 or rank-2 required");
    if (axis > (rank1 ? std::size_t{0} : std::size_t{1}))
        throw DimensionError(strf("slice: axis %zu out of range for %s", axis,
                                  shape_str(x.shape()).c_str()));
    const std::size_t extent = rank1 ? x.dim(0) : x.dim(axis);
    if (start >= end || end > extent)
        throw DimensionError(strf("slice: range [%zu,%zu) out of %zu", start,
                                  end, extent));

    const std::size_t r = rank1 ? x.dim(0) : x.dim(0);
    const std::size_t c = rank1 ? 1 : x.dim(1);
    const std::size_t len = end - start;

    Shape out_shape;
    std::vector<double> out;
    const auto& xv = x.value();
    if (rank1) {
        out_shape = {len};
        out.assign(xv.begin() + static_cast<long>(start),
                   xv.begin() + static_cast<long>(end));
    } else if (axis == 0) {
        out_shape = {len, c};
        out.assign(xv.begin() + static_cast<long>(start * c),
                   xv.begin() + static_cast<long>(end * c));
    } else {
        out_shape = {r, len};
        out.resize(r * len);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < len; ++j)
                out[i * len + j] = xv[i * c + start + j];
    }

    return g.record(std::move(out_shape), std::move(out), {x},
                    [axis, rank1, start, r, c, len](Node& self) {
                        Node* p = self.parents[0].get();
                        if (!p->requires_grad) return;
                        p->ensure_grad();
                        if (rank1 || axis == 0) {
                            const std::size_t width = rank1 ? 1 : c;
                            for (std::size_t i = 0; i < self.grad.size(); ++i)
                                p->grad[start * width + i] += self.grad[i];
                        } else {
                            for (std::size_t i = 0; i < r; ++i)
                                for (std::size_t j = 0; j < len; ++j)
                                    p->grad[i * c + start + j] +=
                                        self.grad[i * len + j];
                        }
                    });
}

Tensor transpose(Graph& g, const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("transpose: rank-2 required");
    const std::size_t r = x.dim(0), c = x.dim(1);
    std::vector<double> out(x.size());
    const auto& xv = x.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = xv[i * c + j];
    return g.record({c, r}, std::move(out), {x}, [r, c](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                p->grad[i * c + j] += self.grad[j * r + i];
    });
}

Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size())
        throw DimensionError(strf("reshape: %s to %s",
                                  shape_str(x.shape()).c_str(),
                                  shape_str(shape).c_str()));
    std::vector<double> out = x.value();
    return g.record(std::move(shape), std::move(out), {x}, [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            p->grad[i] += self.grad[i];
    });
}

Tensor sum(Graph& g, const Tensor& x) {
    double s = 0.0;
    for (double v : x.value()) s += v;
    return g.record({1}, {s}, {x}, [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double d = self.grad[0];
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += d;
    });
}

Tensor mean(Graph& g, const Tensor& x) {
    double s = 0.0;
    for (double v : x.value()) s += v;
    const double n = static_cast<double>(x.size());
    return g.record({1}, {s / n}, {x}, [n](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        const double d = self.grad[0] / n;
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += d;
    });
}

Tensor pick(Graph& g, const Tensor& x, std::size_t flat_index) {
    if (flat_index >= x.size())
        throw DimensionError(strf("pick: index %zu out of %zu elements",
                                  flat_index, x.size()));
    return g.record({1}, {x.value()[flat_index]}, {x},
                    [flat_index](Node& self) {
                        Node* p = self.parents[0].get();
                        if (!p->requires_grad) return;
                        p->ensure_grad();
                        p->grad[flat_index] += self.grad[0];
                    });
}

Tensor embedding_cols(Graph& g, const Tensor& table,
                      std::span<const int> ids) {
    if (table.rank() != 2) throw DimensionError("embedding: rank-2 table");
    const std::size_t v = table.dim(0), e = table.dim(1), n = ids.size();
    std::vector<int> idv(ids.begin(), ids.end());
    for (int id : idv)
        if (id < 0 || static_cast<std::size_t>(id) >= v)
            throw DataError(strf("embedding: id %d out of table rows %zu", id,
                                 v));
    std::vector<double> out(e * n);
    const auto& tv = table.value();
    for (std::size_t j = 0; j < n; ++j) {
        const double* row = tv.data() + static_cast<std::size_t>(idv[j]) * e;
        for (std::size_t r = 0; r < e; ++r) out[r * n + j] = row[r];
    }
    return g.record({e, n}, std::move(out), {table},
                    [e, n, idv = std::move(idv)](Node& self) {
                        Node* p = self.parents[0].get();
                        if (!p->requires_grad) return;
                        p->ensure_grad();
                        for (std::size_t j = 0; j < n; ++j) {
                            double* row = p->grad.data() +
                                          static_cast<std::size_t>(idv[j]) * e;
                            for (std::size_t r = 0; r < e; ++r)
                                row[r] += self.grad[r * n + j];
                        }
                    });
}

Tensor dropout(Graph& g, const Tensor& x, double rate) {
    if (rate < 0.0 || rate >= 1.0)
        throw ContractError(strf("dropout: rate %g outside [0,1)", rate));
    if (!g.training() || rate == 0.0) return x;

    const double keep = 1.0 - rate;
    const double inv = 1.0 / keep;
    std::vector<double> mask(x.size());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = g.rng().bernoulli(keep) ? inv : 0.0;

    std::vector<double> out(x.size());
    const auto& xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
    return g.record(x.shape(), std::move(out), {x},
                    [mask = std::move(mask)](Node& self) {
                        Node* p = self.parents[0].get();
                        if (!p->requires_grad) return;
                        p->ensure_grad();
                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                            p->grad[i] += self.grad[i] * mask[i];
                    });
}

}  // namespace san
