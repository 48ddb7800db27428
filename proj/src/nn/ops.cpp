#include "depest/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "depest/errors.hpp"

namespace depest::nn {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(x.shape()));
  }
}

void accumulate(Tensor* dst, const Tensor& src, double factor = 1.0) {
  if (!dst) return;
  double* d = dst->data();
  const double* s = src.data();
  const std::size_t n = src.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += factor * s[i];
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  return a.graph().record("add", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    accumulate(g.grad_slot(a), go);
    accumulate(g.grad_slot(b), go);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
  return a.graph().record("sub", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    accumulate(g.grad_slot(a), go);
    accumulate(g.grad_slot(b), go, -1.0);
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  return a.graph().record("mul", std::move(out), {a, b}, [a, b](Graph& g, const Tensor& go) {
    if (Tensor* ga = g.grad_slot(a)) {
      const double* vb = g.value(b).data();
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * vb[i];
    }
    if (Tensor* gb = g.grad_slot(b)) {
      const double* va = g.value(a).data();
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * va[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return a.graph().record("scale", std::move(out), {a}, [a, factor](Graph& g, const Tensor& go) {
    accumulate(g.grad_slot(a), go, factor);
  });
}

Var one_minus(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = 1.0 - v;
  return a.graph().record("one_minus", std::move(out), {a}, [a](Graph& g, const Tensor& go) {
    accumulate(g.grad_slot(a), go, -1.0);
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return x.graph().record("relu", std::move(out), {x}, [x](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    const double* vx = g.value(x).data();
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (vx[i] > 0.0) (*gx)[i] += go[i];
    }
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = stable_sigmoid(v);
  Tensor cached = out;
  return x.graph().record("sigmoid", std::move(out), {x},
                          [x, cached = std::move(cached)](Graph& g, const Tensor& go) {
                            Tensor* gx = g.grad_slot(x);
                            if (!gx) return;
                            for (std::size_t i = 0; i < go.size(); ++i) {
                              (*gx)[i] += go[i] * cached[i] * (1.0 - cached[i]);
                            }
                          });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = std::tanh(v);
  Tensor cached = out;
  return x.graph().record("tanh", std::move(out), {x},
                          [x, cached = std::move(cached)](Graph& g, const Tensor& go) {
                            Tensor* gx = g.grad_slot(x);
                            if (!gx) return;
                            for (std::size_t i = 0; i < go.size(); ++i) {
                              (*gx)[i] += go[i] * (1.0 - cached[i] * cached[i]);
                            }
                          });
}

Var softmax(Var x) {
  const Tensor& in = x.value();
  const std::size_t cols = in.shape().back();
  const std::size_t rows = in.size() / cols;
  Tensor out(in.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * cols;
    double* dst = out.data() + r * cols;
    const double mx = *std::max_element(src, src + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      dst[j] = std::exp(src[j] - mx);
      total += dst[j];
    }
    for (std::size_t j = 0; j < cols; ++j) dst[j] /= total;
  }
  Tensor cached = out;
  return x.graph().record("softmax", std::move(out), {x},
                          [x, rows, cols, cached = std::move(cached)](Graph& g, const Tensor& go) {
                            Tensor* gx = g.grad_slot(x);
                            if (!gx) return;
                            for (std::size_t r = 0; r < rows; ++r) {
                              const double* y = cached.data() + r * cols;
                              const double* dy = go.data() + r * cols;
                              double dot = 0.0;
                              for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
                              double* dx = gx->data() + r * cols;
                              for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
                            }
                          });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.graph().record("reshape", std::move(out), {x}, [x](Graph& g, const Tensor& go) {
    accumulate(g.grad_slot(x), go);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) {
        throw ShapeError("concat: shape mismatch " + shape_string(s) + " vs " + shape_string(first));
      }
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  Tensor out(out_shape);
  const std::size_t out_chunk = out_shape[axis] * inner;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    const std::size_t chunk = p.shape()[axis] * inner;
    const double* src = p.value().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * chunk, src + (o + 1) * chunk, out.data() + o * out_chunk + off);
    }
    off += chunk;
  }
  return parts.front().graph().record(
      "concat", std::move(out), parts,
      [parts, offsets, outer, inner, axis, out_chunk](Graph& g, const Tensor& go) {
        for (std::size_t i = 0; i < parts.size(); ++i) {
          Tensor* gp = g.grad_slot(parts[i]);
          if (!gp) continue;
          const std::size_t chunk = g.value(parts[i]).shape()[axis] * inner;
          for (std::size_t o = 0; o < outer; ++o) {
            const double* src = go.data() + o * out_chunk + offsets[i];
            double* dst = gp->data() + o * chunk;
            for (std::size_t k = 0; k < chunk; ++k) dst[k] += src[k];
          }
        }
      });
}

Var swap_last_two(Var x) {
  require_rank(x, 3, "swap_last_two");
  const auto n = x.shape()[0], a = x.shape()[1], b = x.shape()[2];
  Tensor out({n, b, a});
  const double* src = x.value().data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < a; ++p)
      for (std::size_t q = 0; q < b; ++q) out[(i * b + q) * a + p] = src[(i * a + p) * b + q];
  return x.graph().record("swap_last_two", std::move(out), {x}, [x, n, a, b](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < a; ++p)
        for (std::size_t q = 0; q < b; ++q) (*gx)[(i * a + p) * b + q] += go[(i * b + q) * a + p];
  });
}

Var select_step(Var x, std::size_t t) {
  require_rank(x, 3, "select_step");
  const auto n = x.shape()[0], steps = x.shape()[1], d = x.shape()[2];
  if (t >= steps) throw ShapeError("select_step: step out of range");
  Tensor out({n, d});
  const double* src = x.value().data();
  for (std::size_t i = 0; i < n; ++i) std::copy_n(src + (i * steps + t) * d, d, out.data() + i * d);
  return x.graph().record("select_step", std::move(out), {x}, [x, n, steps, d, t](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) (*gx)[(i * steps + t) * d + k] += go[i * d + k];
  });
}

Var add_channel_broadcast(Var x, Var per_channel) {
  const Shape& s = x.shape();
  if (s.size() < 2 || per_channel.shape() != Shape{s[0], s[1]}) {
    throw ShapeError("add_channel_broadcast: " + shape_string(s) + " with " +
                     shape_string(per_channel.shape()));
  }
  const std::size_t nc = s[0] * s[1];
  const std::size_t inner = x.value().size() / nc;
  Tensor out = x.value();
  const double* pc = per_channel.value().data();
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t k = 0; k < inner; ++k) out[i * inner + k] += pc[i];
  return x.graph().record("add_channel_broadcast", std::move(out), {x, per_channel},
                          [x, per_channel, nc, inner](Graph& g, const Tensor& go) {
                            accumulate(g.grad_slot(x), go);
                            if (Tensor* gp = g.grad_slot(per_channel)) {
                              for (std::size_t i = 0; i < nc; ++i) {
                                double acc = 0.0;
                                for (std::size_t k = 0; k < inner; ++k) acc += go[i * inner + k];
                                (*gp)[i] += acc;
                              }
                            }
                          });
}

Var sum(Var x) {
  const auto& v = x.value().values();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return x.graph().record("sum", Tensor::scalar(total), {x}, [x](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (double& v : gx->values()) v += go[0];
  });
}

Var weighted_sum(Var x, const Tensor& coeffs) {
  if (coeffs.shape() != x.shape()) throw ShapeError("weighted_sum: coefficient shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) total += coeffs[i] * x.value()[i];
  return x.graph().record("weighted_sum", Tensor::scalar(total), {x}, [x, coeffs](Graph& g, const Tensor& go) {
    accumulate(g.grad_slot(x), coeffs, go[0]);
  });
}

namespace {

void require_uniform(const std::vector<Var>& xs, const char* op) {
  if (xs.empty()) throw ShapeError(std::string(op) + ": no inputs");
  for (const Var& x : xs) require_same_shape(xs.front(), x, op);
}

/// Routes each output element to the input selected by `pick`.
Var select_elementwise(const char* op, const std::vector<Var>& xs, std::vector<std::size_t> chosen) {
  const std::size_t size = xs.front().value().size();
  Tensor out(xs.front().shape());
  for (std::size_t i = 0; i < size; ++i) out[i] = xs[chosen[i]].value()[i];
  return xs.front().graph().record(op, std::move(out), xs,
                                   [xs, chosen = std::move(chosen)](Graph& g, const Tensor& go) {
                                     std::vector<Tensor*> slots;
                                     for (const Var& x : xs) slots.push_back(g.grad_slot(x));
                                     for (std::size_t i = 0; i < go.size(); ++i) {
                                       if (Tensor* t = slots[chosen[i]]) (*t)[i] += go[i];
                                     }
                                   });
}

}  // namespace

Var elementwise_product(const std::vector<Var>& xs) {
  require_uniform(xs, "elementwise_product");
  const std::size_t size = xs.front().value().size();
  Tensor out(xs.front().shape(), 1.0);
  for (const Var& x : xs)
    for (std::size_t i = 0; i < size; ++i) out[i] *= x.value()[i];
  return xs.front().graph().record("elementwise_product", std::move(out), xs, [xs, size](Graph& g, const Tensor& go) {
    for (std::size_t k = 0; k < xs.size(); ++k) {
      Tensor* gk = g.grad_slot(xs[k]);
      if (!gk) continue;
      for (std::size_t i = 0; i < size; ++i) {
        double others = 1.0;
        for (std::size_t j = 0; j < xs.size(); ++j) {
          if (j != k) others *= g.value(xs[j])[i];
        }
        (*gk)[i] += go[i] * others;
      }
    }
  });
}

Var elementwise_sum(const std::vector<Var>& xs) {
  require_uniform(xs, "elementwise_sum");
  Tensor out(xs.front().shape(), 0.0);
  for (const Var& x : xs)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += x.value()[i];
  return xs.front().graph().record("elementwise_sum", std::move(out), xs, [xs](Graph& g, const Tensor& go) {
    for (const Var& x : xs) accumulate(g.grad_slot(x), go);
  });
}

Var elementwise_max(const std::vector<Var>& xs) {
  require_uniform(xs, "elementwise_max");
  const std::size_t size = xs.front().value().size();
  std::vector<std::size_t> chosen(size, 0);
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t k = 1; k < xs.size(); ++k) {
      if (xs[k].value()[i] > xs[chosen[i]].value()[i]) chosen[i] = k;
    }
  }
  return select_elementwise("elementwise_max", xs, std::move(chosen));
}

Var elementwise_median(const std::vector<Var>& xs) {
  require_uniform(xs, "elementwise_median");
  const std::size_t size = xs.front().value().size();
  const std::size_t rank = (xs.size() - 1) / 2;
  std::vector<std::size_t> chosen(size, 0);
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < size; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a].value()[i] < xs[b].value()[i]; });
    chosen[i] = order[rank];
  }
  return select_elementwise("elementwise_median", xs, std::move(chosen));
}

Var conv1d(Var x, Var weight, std::optional<Var> bias, Conv1dOptions opt) {
  require_rank(x, 3, "conv1d");
  require_rank(weight, 3, "conv1d weight");
  const auto n = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const auto cout = weight.shape()[0], k = weight.shape()[2];
  if (weight.shape()[1] != cin) {
    throw ShapeError("conv1d: weight expects " + std::to_string(weight.shape()[1]) + " input channels, got " +
                     std::to_string(cin));
  }
  if (bias && bias->shape() != Shape{cout}) throw ShapeError("conv1d: bias shape mismatch");
  if (opt.stride == 0) throw ConfigError("conv1d: stride must be positive");
  if (len + 2 * opt.padding < k) throw ShapeError("conv1d: input shorter than kernel");
  const std::size_t out_len = (len + 2 * opt.padding - k) / opt.stride + 1;
  const std::size_t stride = opt.stride;
  const auto pad = static_cast<std::ptrdiff_t>(opt.padding);

  // Valid output range for kernel tap kk: 0 <= t*stride + kk - pad < len.
  auto range = [=](std::size_t kk) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kk) - pad;
    std::ptrdiff_t lo = 0;
    if (shift < 0) lo = (-shift + static_cast<std::ptrdiff_t>(stride) - 1) / static_cast<std::ptrdiff_t>(stride);
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(len) - 1 - shift;
    std::ptrdiff_t hi = last < 0 ? 0 : last / static_cast<std::ptrdiff_t>(stride) + 1;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_len));
    return std::pair<std::ptrdiff_t, std::ptrdiff_t>{lo, std::max(lo, hi)};
  };

  Tensor out({n, cout, out_len}, 0.0);
  const double* px = x.value().data();
  const double* pw = weight.value().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* dst = out.data() + (b * cout + co) * out_len;
      if (bias) std::fill(dst, dst + out_len, bias->value()[co]);
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* src = px + (b * cin + ci) * len;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double w = pw[(co * cin + ci) * k + kk];
          const auto [lo, hi] = range(kk);
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kk) - pad;
          if (stride == 1) {
            const double* s = src + shift;
            for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t] += w * s[t];
          } else {
            for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t] += w * src[t * static_cast<std::ptrdiff_t>(stride) + shift];
          }
        }
      }
    }
  }

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return x.graph().record(
      "conv1d", std::move(out), inputs, [=](Graph& g, const Tensor& go) {
        Tensor* gx = g.grad_slot(x);
        Tensor* gw = g.grad_slot(weight);
        Tensor* gb = bias ? g.grad_slot(*bias) : nullptr;
        const double* vx = g.value(x).data();
        const double* vw = g.value(weight).data();
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double* dy = go.data() + (b * cout + co) * out_len;
            if (gb) {
              double acc = 0.0;
              for (std::size_t t = 0; t < out_len; ++t) acc += dy[t];
              (*gb)[co] += acc;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const double* src = vx + (b * cin + ci) * len;
              double* dsrc = gx ? gx->data() + (b * cin + ci) * len : nullptr;
              for (std::size_t kk = 0; kk < k; ++kk) {
                const auto [lo, hi] = range(kk);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kk) - pad;
                const auto st = static_cast<std::ptrdiff_t>(stride);
                const std::size_t widx = (co * cin + ci) * k + kk;
                if (gw) {
                  double acc = 0.0;
                  for (std::ptrdiff_t t = lo; t < hi; ++t) acc += dy[t] * src[t * st + shift];
                  (*gw)[widx] += acc;
                }
                if (dsrc) {
                  const double w = vw[widx];
                  for (std::ptrdiff_t t = lo; t < hi; ++t) dsrc[t * st + shift] += w * dy[t];
                }
              }
            }
          }
        }
      });
}

Var conv2d(Var x, Var weight, std::optional<Var> bias, Conv2dOptions opt) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const auto n = x.shape()[0], cin = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const auto cout = weight.shape()[0], kh = weight.shape()[2], kw = weight.shape()[3];
  if (weight.shape()[1] != cin) throw ShapeError("conv2d: input channel mismatch");
  if (bias && bias->shape() != Shape{cout}) throw ShapeError("conv2d: bias shape mismatch");
  if (opt.stride_h == 0 || opt.stride_w == 0) throw ConfigError("conv2d: stride must be positive");
  if (h + 2 * opt.pad_h < kh || w + 2 * opt.pad_w < kw) {
    throw ShapeError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) + " larger than input " +
                     std::to_string(h) + "x" + std::to_string(w));
  }
  const std::size_t oh = (h + 2 * opt.pad_h - kh) / opt.stride_h + 1;
  const std::size_t ow = (w + 2 * opt.pad_w - kw) / opt.stride_w + 1;
  const auto sh = static_cast<std::ptrdiff_t>(opt.stride_h), sw = static_cast<std::ptrdiff_t>(opt.stride_w);
  const auto ph = static_cast<std::ptrdiff_t>(opt.pad_h), pw = static_cast<std::ptrdiff_t>(opt.pad_w);

  // Valid output columns for tap kx: 0 <= c*sw + kx - pw < w.
  auto col_range = [=](std::size_t kx) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pw;
    std::ptrdiff_t lo = shift < 0 ? (-shift + sw - 1) / sw : 0;
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(w) - 1 - shift;
    std::ptrdiff_t hi = last < 0 ? 0 : std::min<std::ptrdiff_t>(last / sw + 1, static_cast<std::ptrdiff_t>(ow));
    return std::pair<std::ptrdiff_t, std::ptrdiff_t>{lo, std::max(lo, hi)};
  };

  Tensor out({n, cout, oh, ow}, 0.0);
  const double* px = x.value().data();
  const double* pwt = weight.value().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t co = 0; co < cout; ++co) {
      double* dst_c = out.data() + (b * cout + co) * oh * ow;
      if (bias) std::fill(dst_c, dst_c + oh * ow, bias->value()[co]);
      for (std::size_t r = 0; r < oh; ++r) {
        double* dst = dst_c + r * ow;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(r) * sh + static_cast<std::ptrdiff_t>(ky) - ph;
            if (row < 0 || row >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* src = px + ((b * cin + ci) * h + static_cast<std::size_t>(row)) * w;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const double wv = pwt[((co * cin + ci) * kh + ky) * kw + kx];
              const auto [lo, hi] = col_range(kx);
              const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pw;
              if (sw == 1) {
                const double* s = src + shift;
                for (std::ptrdiff_t c = lo; c < hi; ++c) dst[c] += wv * s[c];
              } else {
                for (std::ptrdiff_t c = lo; c < hi; ++c) dst[c] += wv * src[c * sw + shift];
              }
            }
          }
        }
      }
    }
  }

  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return x.graph().record("conv2d", std::move(out), inputs, [=](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    Tensor* gw = g.grad_slot(weight);
    Tensor* gb = bias ? g.grad_slot(*bias) : nullptr;
    const double* vx = g.value(x).data();
    const double* vw = g.value(weight).data();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t co = 0; co < cout; ++co) {
        const double* dy_c = go.data() + (b * cout + co) * oh * ow;
        if (gb) {
          double acc = 0.0;
          for (std::size_t i = 0; i < oh * ow; ++i) acc += dy_c[i];
          (*gb)[co] += acc;
        }
        for (std::size_t r = 0; r < oh; ++r) {
          const double* dy = dy_c + r * ow;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t ky = 0; ky < kh; ++ky) {
              const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(r) * sh + static_cast<std::ptrdiff_t>(ky) - ph;
              if (row < 0 || row >= static_cast<std::ptrdiff_t>(h)) continue;
              const std::size_t row_off = ((b * cin + ci) * h + static_cast<std::size_t>(row)) * w;
              const double* src = vx + row_off;
              double* dsrc = gx ? gx->data() + row_off : nullptr;
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const std::size_t widx = ((co * cin + ci) * kh + ky) * kw + kx;
                const auto [lo, hi] = col_range(kx);
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pw;
                if (gw) {
                  double acc = 0.0;
                  for (std::ptrdiff_t c = lo; c < hi; ++c) acc += dy[c] * src[c * sw + shift];
                  (*gw)[widx] += acc;
                }
                if (dsrc) {
                  const double wv = vw[widx];
                  for (std::ptrdiff_t c = lo; c < hi; ++c) dsrc[c * sw + shift] += wv * dy[c];
                }
              }
            }
          }
        }
      }
    }
  });
}

Var batch_norm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var, BatchNormOptions opt) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ShapeError("batch_norm: input needs [N, C, ...]");
  const std::size_t n = s[0], c = s[1];
  const std::size_t inner = x.value().size() / (n * c);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} || running_mean.shape() != Shape{c} ||
      running_var.shape() != Shape{c}) {
    throw ShapeError("batch_norm: parameter shape mismatch for " + std::to_string(c) + " channels");
  }
  const std::size_t count = n * inner;
  const double* px = x.value().data();
  const double* pg = gamma.value().data();
  const double* pb = beta.value().data();

  Tensor out(s);
  Tensor xhat(s);
  std::vector<double> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    if (opt.training) {
      for (std::size_t b = 0; b < n; ++b) {
        const double* src = px + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) mean += src[i];
      }
      mean /= static_cast<double>(count);
      for (std::size_t b = 0; b < n; ++b) {
        const double* src = px + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) var += (src[i] - mean) * (src[i] - mean);
      }
      var /= static_cast<double>(count);
      if (opt.update_running_stats) {
        const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
        running_mean[ch] = (1.0 - opt.momentum) * running_mean[ch] + opt.momentum * mean;
        running_var[ch] = (1.0 - opt.momentum) * running_var[ch] + opt.momentum * unbiased;
      }
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    inv_std[ch] = 1.0 / std::sqrt(var + opt.eps);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double xh = (px[off + i] - mean) * inv_std[ch];
        xhat[off + i] = xh;
        out[off + i] = pg[ch] * xh + pb[ch];
      }
    }
  }

  const bool training = opt.training;
  return x.graph().record("batch_norm", std::move(out), {x, gamma, beta},
                          [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph& g, const Tensor& go) {
                            Tensor* gx = g.grad_slot(x);
                            Tensor* gg = g.grad_slot(gamma);
                            Tensor* gbeta = g.grad_slot(beta);
                            const double* vg = g.value(gamma).data();
                            for (std::size_t ch = 0; ch < c; ++ch) {
                              double sum_dy = 0.0, sum_dy_xhat = 0.0;
                              for (std::size_t b = 0; b < n; ++b) {
                                const std::size_t off = (b * c + ch) * inner;
                                for (std::size_t i = 0; i < inner; ++i) {
                                  sum_dy += go[off + i];
                                  sum_dy_xhat += go[off + i] * xhat[off + i];
                                }
                              }
                              if (gg) (*gg)[ch] += sum_dy_xhat;
                              if (gbeta) (*gbeta)[ch] += sum_dy;
                              if (!gx) continue;
                              const double k = vg[ch] * inv_std[ch];
                              const double m = static_cast<double>(count);
                              for (std::size_t b = 0; b < n; ++b) {
                                const std::size_t off = (b * c + ch) * inner;
                                for (std::size_t i = 0; i < inner; ++i) {
                                  if (training) {
                                    (*gx)[off + i] += k * (go[off + i] - sum_dy / m - xhat[off + i] * sum_dy_xhat / m);
                                  } else {
                                    (*gx)[off + i] += k * go[off + i];
                                  }
                                }
                              }
                            }
                          });
}

Var max_pool1d(Var x, std::size_t pool) {
  require_rank(x, 3, "max_pool1d");
  if (pool == 0) throw ConfigError("max_pool1d: pool size must be positive");
  const auto n = x.shape()[0], c = x.shape()[1], len = x.shape()[2];
  if (len < pool) throw ShapeError("max_pool1d: sequence length " + std::to_string(len) + " < pool " +
                                   std::to_string(pool));
  const std::size_t out_len = len / pool;
  Tensor out({n, c, out_len});
  std::vector<std::size_t> argmax(n * c * out_len);
  const double* px = x.value().data();
  for (std::size_t row = 0; row < n * c; ++row) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = row * len + t * pool;
      for (std::size_t k = 1; k < pool; ++k) {
        const std::size_t idx = row * len + t * pool + k;
        if (px[idx] > px[best]) best = idx;
      }
      out[row * out_len + t] = px[best];
      argmax[row * out_len + t] = best;
    }
  }
  return x.graph().record("max_pool1d", std::move(out), {x}, [x, argmax = std::move(argmax)](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    for (std::size_t i = 0; i < argmax.size(); ++i) (*gx)[argmax[i]] += go[i];
  });
}

Var lstm(Var x, Var w_ih, Var w_hh, Var bias, bool reverse) {
  require_rank(x, 3, "lstm");
  const auto n = x.shape()[0], steps = x.shape()[1], d = x.shape()[2];
  if (w_hh.shape().size() != 2) throw ShapeError("lstm: w_hh must be [4H, H]");
  const std::size_t hid = w_hh.shape()[1];
  const std::size_t g4 = 4 * hid;
  if (w_ih.shape() != Shape{g4, d} || w_hh.shape() != Shape{g4, hid} || bias.shape() != Shape{g4}) {
    throw ShapeError("lstm: weight shapes " + shape_string(w_ih.shape()) + ", " + shape_string(w_hh.shape()) +
                     ", " + shape_string(bias.shape()) + " do not fit input " + shape_string(x.shape()));
  }
  const double* px = x.value().data();
  const double* wi = w_ih.value().data();
  const double* wh = w_hh.value().data();
  const double* pb = bias.value().data();

  Tensor out({n, steps, hid}, 0.0);
  // Activated gates (i, f, g, o) and cell states per (sample, step).
  std::vector<double> gates(n * steps * g4);
  std::vector<double> cells(n * steps * hid);
  std::vector<double> a(g4);
  std::vector<double> h(hid), c(hid);
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(h.begin(), h.end(), 0.0);
    std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t t = reverse ? steps - 1 - s : s;
      const double* xt = px + (b * steps + t) * d;
      for (std::size_t r = 0; r < g4; ++r) {
        double acc = pb[r];
        const double* wr = wi + r * d;
        for (std::size_t k = 0; k < d; ++k) acc += wr[k] * xt[k];
        const double* ur = wh + r * hid;
        for (std::size_t k = 0; k < hid; ++k) acc += ur[k] * h[k];
        a[r] = acc;
      }
      double* gt = gates.data() + (b * steps + t) * g4;
      double* ct = cells.data() + (b * steps + t) * hid;
      double* ht = out.data() + (b * steps + t) * hid;
      for (std::size_t k = 0; k < hid; ++k) {
        const double ig = stable_sigmoid(a[k]);
        const double fg = stable_sigmoid(a[hid + k]);
        const double cg = std::tanh(a[2 * hid + k]);
        const double og = stable_sigmoid(a[3 * hid + k]);
        gt[k] = ig;
        gt[hid + k] = fg;
        gt[2 * hid + k] = cg;
        gt[3 * hid + k] = og;
        c[k] = fg * c[k] + ig * cg;
        h[k] = og * std::tanh(c[k]);
        ct[k] = c[k];
        ht[k] = h[k];
      }
    }
  }

  Tensor hidden_cache = out;
  return x.graph().record(
      "lstm", std::move(out), {x, w_ih, w_hh, bias},
      [=, gates = std::move(gates), cells = std::move(cells), hs = std::move(hidden_cache)](Graph& g,
                                                                                           const Tensor& go) {
        Tensor* gx = g.grad_slot(x);
        Tensor* gwi = g.grad_slot(w_ih);
        Tensor* gwh = g.grad_slot(w_hh);
        Tensor* gb = g.grad_slot(bias);
        const double* vx = g.value(x).data();
        const double* vwi = g.value(w_ih).data();
        const double* vwh = g.value(w_hh).data();
        std::vector<double> dh_next(hid), dc_next(hid), da(g4), dh(hid);
        for (std::size_t b = 0; b < n; ++b) {
          std::fill(dh_next.begin(), dh_next.end(), 0.0);
          std::fill(dc_next.begin(), dc_next.end(), 0.0);
          for (std::size_t s = steps; s-- > 0;) {
            const std::size_t t = reverse ? steps - 1 - s : s;
            const bool has_prev = s > 0;
            const std::size_t tp = reverse ? t + 1 : t - 1;
            const double* gt = gates.data() + (b * steps + t) * g4;
            const double* ct = cells.data() + (b * steps + t) * hid;
            const double* c_prev = has_prev ? cells.data() + (b * steps + tp) * hid : nullptr;
            const double* h_prev = has_prev ? hs.data() + (b * steps + tp) * hid : nullptr;
            const double* dy = go.data() + (b * steps + t) * hid;
            for (std::size_t k = 0; k < hid; ++k) {
              const double ig = gt[k], fg = gt[hid + k], cg = gt[2 * hid + k], og = gt[3 * hid + k];
              const double tc = std::tanh(ct[k]);
              const double dhk = dy[k] + dh_next[k];
              const double dc = dhk * og * (1.0 - tc * tc) + dc_next[k];
              const double cp = has_prev ? c_prev[k] : 0.0;
              da[k] = dc * cg * ig * (1.0 - ig);
              da[hid + k] = dc * cp * fg * (1.0 - fg);
              da[2 * hid + k] = dc * ig * (1.0 - cg * cg);
              da[3 * hid + k] = dhk * tc * og * (1.0 - og);
              dc_next[k] = dc * fg;
            }
            const double* xt = vx + (b * steps + t) * d;
            if (gb) {
              for (std::size_t r = 0; r < g4; ++r) (*gb)[r] += da[r];
            }
            if (gwi) {
              for (std::size_t r = 0; r < g4; ++r) {
                double* row = gwi->data() + r * d;
                for (std::size_t k = 0; k < d; ++k) row[k] += da[r] * xt[k];
              }
            }
            if (gwh && has_prev) {
              for (std::size_t r = 0; r < g4; ++r) {
                double* row = gwh->data() + r * hid;
                for (std::size_t k = 0; k < hid; ++k) row[k] += da[r] * h_prev[k];
              }
            }
            if (gx) {
              double* dxt = gx->data() + (b * steps + t) * d;
              for (std::size_t r = 0; r < g4; ++r) {
                const double* row = vwi + r * d;
                for (std::size_t k = 0; k < d; ++k) dxt[k] += da[r] * row[k];
              }
            }
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            for (std::size_t r = 0; r < g4; ++r) {
              const double* row = vwh + r * hid;
              for (std::size_t k = 0; k < hid; ++k) dh_next[k] += da[r] * row[k];
            }
          }
        }
      });
}

Var linear(Var x, Var weight, std::optional<Var> bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear weight");
  const auto n = x.shape()[0], in = x.shape()[1], outf = weight.shape()[0];
  if (weight.shape()[1] != in) {
    throw ShapeError("linear: weight " + shape_string(weight.shape()) + " does not fit input " +
                     shape_string(x.shape()));
  }
  if (bias && bias->shape() != Shape{outf}) throw ShapeError("linear: bias shape mismatch");
  Tensor out({n, outf});
  const double* px = x.value().data();
  const double* pw = weight.value().data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < outf; ++o) {
      double acc = bias ? bias->value()[o] : 0.0;
      const double* row = pw + o * in;
      const double* xr = px + b * in;
      for (std::size_t k = 0; k < in; ++k) acc += row[k] * xr[k];
      out[b * outf + o] = acc;
    }
  }
  std::vector<Var> inputs{x, weight};
  if (bias) inputs.push_back(*bias);
  return x.graph().record("linear", std::move(out), inputs, [=](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    Tensor* gw = g.grad_slot(weight);
    Tensor* gb = bias ? g.grad_slot(*bias) : nullptr;
    const double* vx = g.value(x).data();
    const double* vw = g.value(weight).data();
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t o = 0; o < outf; ++o) {
        const double dy = go[b * outf + o];
        if (gb) (*gb)[o] += dy;
        if (gw) {
          double* row = gw->data() + o * in;
          const double* xr = vx + b * in;
          for (std::size_t k = 0; k < in; ++k) row[k] += dy * xr[k];
        }
        if (gx) {
          double* dxr = gx->data() + b * in;
          const double* row = vw + o * in;
          for (std::size_t k = 0; k < in; ++k) dxr[k] += dy * row[k];
        }
      }
    }
  });
}

Var global_avg_pool(Var x) {
  const Shape& s = x.shape();
  if (s.size() < 3) throw ShapeError("global_avg_pool: input needs [N, C, ...]");
  const std::size_t nc = s[0] * s[1];
  const std::size_t inner = x.value().size() / nc;
  Tensor out({s[0], s[1]});
  const double* px = x.value().data();
  for (std::size_t i = 0; i < nc; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < inner; ++k) acc += px[i * inner + k];
    out[i] = acc / static_cast<double>(inner);
  }
  return x.graph().record("global_avg_pool", std::move(out), {x}, [x, nc, inner](Graph& g, const Tensor& go) {
    Tensor* gx = g.grad_slot(x);
    if (!gx) return;
    const double scale_factor = 1.0 / static_cast<double>(inner);
    for (std::size_t i = 0; i < nc; ++i)
      for (std::size_t k = 0; k < inner; ++k) (*gx)[i * inner + k] += go[i] * scale_factor;
  });
}

Var kl_divergence(Var pred, const Tensor& target, const Tensor& row_weights, double eps) {
  require_rank(pred, 2, "kl_divergence");
  if (target.shape() != pred.shape()) {
    throw ShapeError("kl_divergence: target " + shape_string(target.shape()) + " vs prediction " +
                     shape_string(pred.shape()));
  }
  const std::size_t rows = pred.shape()[0], cols = pred.shape()[1];
  if (row_weights.shape() != Shape{rows}) throw ShapeError("kl_divergence: one weight per row required");
  const double* p = pred.value().data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double row_loss = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double t = target[r * cols + j];
      if (t <= 0.0) continue;
      row_loss += t * std::log(t / std::max(p[r * cols + j], eps));
    }
    total += row_weights[r] * row_loss;
  }
  return pred.graph().record("kl_divergence", Tensor::scalar(total), {pred},
                             [=](Graph& g, const Tensor& go) {
                               Tensor* gp = g.grad_slot(pred);
                               if (!gp) return;
                               const double* pv = g.value(pred).data();
                               for (std::size_t r = 0; r < rows; ++r) {
                                 for (std::size_t j = 0; j < cols; ++j) {
                                   const std::size_t i = r * cols + j;
                                   const double t = target[i];
                                   if (t <= 0.0 || pv[i] < eps) continue;
                                   (*gp)[i] -= go[0] * row_weights[r] * t / pv[i];
                                 }
                               }
                             });
}

}  // namespace depest::nn
