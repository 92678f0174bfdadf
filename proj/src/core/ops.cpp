#include "spartan/ops.hpp"

#include <algorithm>
#include <array>
#include <initializer_list>
#include <cmath>
#include <numbers>
#include <string>

#include "spartan/parallel.hpp"

namespace spartan {

namespace {

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must be rank " + std::to_string(rank) +
                     ", got " + shape_str(s));
  }
}

template <class T>
void require_defined(const Tensor<T>& t, const char* op, const char* what) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": " + what + " is undefined");
}

// Column matrix [Cg*KH*KW, Hout*Wout] for one (sample, group) slice.
template <class T>
void im2col(const T* x, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, const Conv2dOptions& o, std::size_t hout, std::size_t wout, T* col) {
  const std::size_t p = hout * wout;
  const auto pad = static_cast<std::ptrdiff_t>(o.padding);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* xc = x + c * h * w;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        T* dst = col + ((c * kh + i) * kw + j) * p;
        for (std::size_t oy = 0; oy < hout; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * o.stride + i * o.dilation) - pad;
          T* row = dst + oy * wout;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(row, row + wout, T{0});
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * w;
          for (std::size_t ox = 0; ox < wout; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * o.stride + j * o.dilation) - pad;
            row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? T{0}
                                                                       : src[static_cast<std::size_t>(ix)];
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, std::size_t channels, std::size_t h, std::size_t w, std::size_t kh,
                std::size_t kw, const Conv2dOptions& o, std::size_t hout, std::size_t wout, T* gx) {
  const std::size_t p = hout * wout;
  const auto pad = static_cast<std::ptrdiff_t>(o.padding);
  for (std::size_t c = 0; c < channels; ++c) {
    T* gc = gx + c * h * w;
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        const T* src = col + ((c * kh + i) * kw + j) * p;
        for (std::size_t oy = 0; oy < hout; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * o.stride + i * o.dilation) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          T* dst = gc + static_cast<std::size_t>(iy) * w;
          const T* row = src + oy * wout;
          for (std::size_t ox = 0; ox < wout; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * o.stride + j * o.dilation) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[static_cast<std::size_t>(ix)] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, const Conv2dOptions& o) {
  if (o.stride == 0 || o.dilation == 0) throw ConfigError("conv2d: stride and dilation must be >= 1");
  const std::size_t span = o.dilation * (kernel - 1) + 1;
  const std::size_t padded = in + 2 * o.padding;
  if (kernel == 0 || span > padded) {
    throw ShapeError("conv2d: kernel span " + std::to_string(span) + " exceeds padded input " +
                     std::to_string(padded));
  }
  return (padded - span) / o.stride + 1;
}

// ---------------------------------------------------------------------------
// conv2d

template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& o) {
  require_defined(input, "conv2d", "input");
  require_defined(weight, "conv2d", "weight");
  require_rank(input.shape(), 4, "conv2d", "input");
  require_rank(weight.shape(), 4, "conv2d", "weight");
  if (o.groups == 0) throw ConfigError("conv2d: groups must be >= 1");
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), cg = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (cin % o.groups != 0 || cout % o.groups != 0) {
    throw ConfigError("conv2d: groups=" + std::to_string(o.groups) + " must divide Cin=" +
                      std::to_string(cin) + " and Cout=" + std::to_string(cout));
  }
  if (cg != cin / o.groups) {
    throw ShapeError("conv2d: weight " + shape_str(weight.shape()) + " expects " +
                     std::to_string(cg * o.groups) + " input channels, input has " +
                     std::to_string(cin));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match Cout=" +
                     std::to_string(cout));
  }
  const std::size_t hout = conv_out_extent(h, kh, o);
  const std::size_t wout = conv_out_extent(w, kw, o);
  const std::size_t p = hout * wout;
  const std::size_t kdim = cg * kh * kw;
  const std::size_t coutg = cout / o.groups;
  const std::size_t groups = o.groups;

  std::vector<T> out(n * cout * p);
  const T* x = input.ptr();
  const T* wt = weight.ptr();
  const T* b = bias.defined() ? bias.ptr() : nullptr;

  parallel_for(n * groups, [&](std::size_t idx) {
    const std::size_t s = idx / groups, g = idx % groups;
    std::vector<T> col(kdim * p);
    im2col(x + (s * cin + g * cg) * h * w, cg, h, w, kh, kw, o, hout, wout, col.data());
    for (std::size_t co = 0; co < coutg; ++co) {
      const std::size_t oc = g * coutg + co;
      T* dst = out.data() + (s * cout + oc) * p;
      std::fill(dst, dst + p, b ? b[oc] : T{0});
      const T* wrow = wt + oc * kdim;
      for (std::size_t k = 0; k < kdim; ++k) {
        const T wk = wrow[k];
        const T* c = col.data() + k * p;
        for (std::size_t q = 0; q < p; ++q) dst[q] += wk * c[q];
      }
    }
  });

  Shape out_shape{n, cout, hout, wout};
  return detail::make_result<T>(
      std::move(out_shape), std::move(out), "conv2d", {input, weight, bias},
      [=](std::span<const T> gout, std::span<const T>) {
        const bool need_x = input.requires_grad();
        const bool need_w = weight.requires_grad();
        if (bias.requires_grad()) {
          auto gb = detail::grad_buffer(bias);
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t oc = 0; oc < cout; ++oc) {
              const T* go = gout.data() + (s * cout + oc) * p;
              T acc{0};
              for (std::size_t q = 0; q < p; ++q) acc += go[q];
              gb[oc] += acc;
            }
        }
        if (!need_x && !need_w) return;
        T* gx = need_x ? detail::grad_buffer(input).data() : nullptr;
        T* gw = need_w ? detail::grad_buffer(weight).data() : nullptr;
        const T* xs = input.ptr();
        const T* ws = weight.ptr();
        std::vector<T> col(need_w ? kdim * p : 0);
        std::vector<T> dcol(need_x ? kdim * p : 0);
        // Samples are visited in order so weight-gradient sums are deterministic.
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t g = 0; g < groups; ++g) {
            const T* go = gout.data() + (s * cout + g * coutg) * p;
            if (need_w) {
              im2col(xs + (s * cin + g * cg) * h * w, cg, h, w, kh, kw, o, hout, wout, col.data());
              parallel_for(coutg, [&](std::size_t co) {
                const T* gr = go + co * p;
                T* gwr = gw + (g * coutg + co) * kdim;
                for (std::size_t k = 0; k < kdim; ++k) {
                  const T* c = col.data() + k * p;
                  T acc{0};
                  for (std::size_t q = 0; q < p; ++q) acc += gr[q] * c[q];
                  gwr[k] += acc;
                }
              });
            }
            if (need_x) {
              parallel_for(kdim, [&](std::size_t k) {
                T* dst = dcol.data() + k * p;
                std::fill(dst, dst + p, T{0});
                for (std::size_t co = 0; co < coutg; ++co) {
                  const T wk = ws[(g * coutg + co) * kdim + k];
                  const T* gr = go + co * p;
                  for (std::size_t q = 0; q < p; ++q) dst[q] += wk * gr[q];
                }
              });
              col2im_add(dcol.data(), cg, h, w, kh, kw, o, hout, wout, gx + (s * cin + g * cg) * h * w);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// gap

template <class T>
Tensor<T> gap(const Tensor<T>& input) {
  require_defined(input, "gap", "input");
  require_rank(input.shape(), 4, "gap", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  std::vector<T> out(n * c);
  const T* x = input.ptr();
  for (std::size_t i = 0; i < n * c; ++i) {
    T acc{0};
    for (std::size_t q = 0; q < hw; ++q) acc += x[i * hw + q];
    out[i] = acc / static_cast<T>(hw);
  }
  return detail::make_result<T>({n, c, 1, 1}, std::move(out), "gap", {input},
                                [=](std::span<const T> gout, std::span<const T>) {
                                  auto gx = detail::grad_buffer(input);
                                  const T inv = T{1} / static_cast<T>(hw);
                                  for (std::size_t i = 0; i < n * c; ++i) {
                                    const T v = gout[i] * inv;
                                    for (std::size_t q = 0; q < hw; ++q) gx[i * hw + q] += v;
                                  }
                                });
}

// ---------------------------------------------------------------------------
// batchnorm2d

template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var, const BatchNormOptions& o) {
  require_defined(input, "batchnorm2d", "input");
  require_rank(input.shape(), 4, "batchnorm2d", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
    if (!t->defined() || t->rank() != 1 || t->dim(0) != c) {
      throw ShapeError("batchnorm2d: per-channel tensors must be [" + std::to_string(c) + "]");
    }
  }
  const std::size_t m = n * hw;
  if (o.training && m < 2) {
    throw ContractError("batchnorm2d: degenerate batch, N*H*W=" + std::to_string(m) +
                        " < 2 in training mode");
  }
  const T* x = input.ptr();
  const T* gm = gamma.ptr();
  const T* bt = beta.ptr();
  std::vector<T> xhat(input.numel());
  std::vector<T> invstd(c);
  std::vector<T> out(input.numel());

  for (std::size_t ch = 0; ch < c; ++ch) {
    T mu, inv;
    if (o.training) {
      double s = 0.0;
      for (std::size_t s_ = 0; s_ < n; ++s_)
        for (std::size_t q = 0; q < hw; ++q) s += x[(s_ * c + ch) * hw + q];
      const double mean_d = s / static_cast<double>(m);
      double v = 0.0;
      for (std::size_t s_ = 0; s_ < n; ++s_)
        for (std::size_t q = 0; q < hw; ++q) {
          const double d = x[(s_ * c + ch) * hw + q] - mean_d;
          v += d * d;
        }
      const double var_d = v / static_cast<double>(m);
      mu = static_cast<T>(mean_d);
      inv = static_cast<T>(1.0 / std::sqrt(var_d + o.eps));
      auto rm = running_mean.mutable_data();
      auto rv = running_var.mutable_data();
      rm[ch] = static_cast<T>((1.0 - o.momentum) * rm[ch] + o.momentum * mean_d);
      rv[ch] = static_cast<T>((1.0 - o.momentum) * rv[ch] +
                              o.momentum * var_d * static_cast<double>(m) / static_cast<double>(m - 1));
    } else {
      mu = running_mean.data()[ch];
      inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var.data()[ch]) + o.eps));
    }
    invstd[ch] = inv;
    for (std::size_t s_ = 0; s_ < n; ++s_)
      for (std::size_t q = 0; q < hw; ++q) {
        const std::size_t i = (s_ * c + ch) * hw + q;
        xhat[i] = (x[i] - mu) * inv;
        out[i] = gm[ch] * xhat[i] + bt[ch];
      }
  }

  const bool training = o.training;
  return detail::make_result<T>(
      input.shape(), std::move(out), "batchnorm2d", {input, gamma, beta},
      [=, xhat = std::move(xhat), invstd = std::move(invstd)](std::span<const T> g, std::span<const T>) {
        const T* gmv = gamma.ptr();
        T* gx = input.requires_grad() ? detail::grad_buffer(input).data() : nullptr;
        T* gg = gamma.requires_grad() ? detail::grad_buffer(gamma).data() : nullptr;
        T* gb = beta.requires_grad() ? detail::grad_buffer(beta).data() : nullptr;
        for (std::size_t ch = 0; ch < c; ++ch) {
          T sum_g{0}, sum_gx{0};
          for (std::size_t s_ = 0; s_ < n; ++s_)
            for (std::size_t q = 0; q < hw; ++q) {
              const std::size_t i = (s_ * c + ch) * hw + q;
              sum_g += g[i];
              sum_gx += g[i] * xhat[i];
            }
          if (gg) gg[ch] += sum_gx;
          if (gb) gb[ch] += sum_g;
          if (!gx) continue;
          if (training) {
            const T mt = static_cast<T>(m);
            const T k = gmv[ch] * invstd[ch] / mt;
            for (std::size_t s_ = 0; s_ < n; ++s_)
              for (std::size_t q = 0; q < hw; ++q) {
                const std::size_t i = (s_ * c + ch) * hw + q;
                gx[i] += k * (mt * g[i] - sum_g - xhat[i] * sum_gx);
              }
          } else {
            const T k = gmv[ch] * invstd[ch];
            for (std::size_t s_ = 0; s_ < n; ++s_)
              for (std::size_t q = 0; q < hw; ++q) {
                const std::size_t i = (s_ * c + ch) * hw + q;
                gx[i] += k * g[i];
              }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// layernorm_channels

template <class T>
Tensor<T> layernorm_channels(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                             double eps) {
  require_defined(input, "layernorm_channels", "input");
  require_rank(input.shape(), 4, "layernorm_channels", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (c < 2) throw ShapeError("layernorm_channels: needs at least 2 channels");
  for (const Tensor<T>* t : std::initializer_list<const Tensor<T>*>{&gamma, &beta}) {
    if (!t->defined() || t->rank() != 1 || t->dim(0) != c) {
      throw ShapeError("layernorm_channels: gamma/beta must be [" + std::to_string(c) + "]");
    }
  }
  const T* x = input.ptr();
  const T* gm = gamma.ptr();
  const T* bt = beta.ptr();
  std::vector<T> xhat(input.numel());
  std::vector<T> invstd(n * hw);
  std::vector<T> out(input.numel());
  std::vector<double> mu(hw), var(hw);
  for (std::size_t s = 0; s < n; ++s) {
    const T* xs = x + s * c * hw;
    std::fill(mu.begin(), mu.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t q = 0; q < hw; ++q) mu[q] += xs[ch * hw + q];
    for (std::size_t q = 0; q < hw; ++q) mu[q] /= static_cast<double>(c);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t q = 0; q < hw; ++q) {
        const double d = xs[ch * hw + q] - mu[q];
        var[q] += d * d;
      }
    for (std::size_t q = 0; q < hw; ++q) {
      invstd[s * hw + q] = static_cast<T>(1.0 / std::sqrt(var[q] / static_cast<double>(c) + eps));
    }
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t q = 0; q < hw; ++q) {
        const std::size_t i = (s * c + ch) * hw + q;
        xhat[i] = (x[i] - static_cast<T>(mu[q])) * invstd[s * hw + q];
        out[i] = gm[ch] * xhat[i] + bt[ch];
      }
  }

  return detail::make_result<T>(
      input.shape(), std::move(out), "layernorm_channels", {input, gamma, beta},
      [=, xhat = std::move(xhat), invstd = std::move(invstd)](std::span<const T> g, std::span<const T>) {
        const T* gmv = gamma.ptr();
        if (gamma.requires_grad() || beta.requires_grad()) {
          T* gg = gamma.requires_grad() ? detail::grad_buffer(gamma).data() : nullptr;
          T* gb = beta.requires_grad() ? detail::grad_buffer(beta).data() : nullptr;
          for (std::size_t ch = 0; ch < c; ++ch) {
            T sg{0}, sgx{0};
            for (std::size_t s = 0; s < n; ++s)
              for (std::size_t q = 0; q < hw; ++q) {
                const std::size_t i = (s * c + ch) * hw + q;
                sg += g[i];
                sgx += g[i] * xhat[i];
              }
            if (gg) gg[ch] += sgx;
            if (gb) gb[ch] += sg;
          }
        }
        if (!input.requires_grad()) return;
        auto gx = detail::grad_buffer(input);
        std::vector<T> sd(hw), sdx(hw);
        const T ct = static_cast<T>(c);
        for (std::size_t s = 0; s < n; ++s) {
          std::fill(sd.begin(), sd.end(), T{0});
          std::fill(sdx.begin(), sdx.end(), T{0});
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t q = 0; q < hw; ++q) {
              const std::size_t i = (s * c + ch) * hw + q;
              const T d = g[i] * gmv[ch];
              sd[q] += d;
              sdx[q] += d * xhat[i];
            }
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t q = 0; q < hw; ++q) {
              const std::size_t i = (s * c + ch) * hw + q;
              const T d = g[i] * gmv[ch];
              gx[i] += invstd[s * hw + q] / ct * (ct * d - sd[q] - xhat[i] * sdx[q]);
            }
        }
      });
}

// ---------------------------------------------------------------------------
// activation

Activation parse_activation(std::string_view name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "silu") return Activation::silu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation kind) {
  switch (kind) {
    case Activation::gelu:
      return "gelu";
    case Activation::silu:
      return "silu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::relu:
      return "relu";
  }
  return "?";
}

namespace {

template <class T>
T sigmoid_of(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

}  // namespace

template <class T>
Tensor<T> activation(const Tensor<T>& input, Activation kind) {
  require_defined(input, "activation", "input");
  const auto x = input.data();
  std::vector<T> out(x.size());
  const T k = static_cast<T>(kSqrt2OverPi);
  const T c3 = static_cast<T>(kGeluC);
  switch (kind) {
    case Activation::gelu:
      for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x[i];
        out[i] = T{0.5} * v * (T{1} + std::tanh(k * (v + c3 * v * v * v)));
      }
      break;
    case Activation::silu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * sigmoid_of(x[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid_of(x[i]);
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
      break;
  }
  return detail::make_result<T>(
      input.shape(), std::move(out), std::string(activation_name(kind)), {input},
      [=](std::span<const T> g, std::span<const T> y) {
        auto gx = detail::grad_buffer(input);
        const auto xv = input.data();
        switch (kind) {
          case Activation::gelu:
            for (std::size_t i = 0; i < xv.size(); ++i) {
              const T v = xv[i];
              const T t = std::tanh(k * (v + c3 * v * v * v));
              const T d = T{0.5} * (T{1} + t) +
                          T{0.5} * v * (T{1} - t * t) * k * (T{1} + T{3} * c3 * v * v);
              gx[i] += g[i] * d;
            }
            break;
          case Activation::silu:
            for (std::size_t i = 0; i < xv.size(); ++i) {
              const T s = sigmoid_of(xv[i]);
              gx[i] += g[i] * s * (T{1} + xv[i] * (T{1} - s));
            }
            break;
          case Activation::sigmoid:
            for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += g[i] * y[i] * (T{1} - y[i]);
            break;
          case Activation::relu:
            for (std::size_t i = 0; i < xv.size(); ++i) {
              if (xv[i] > T{0}) gx[i] += g[i];
            }
            break;
        }
      });
}

// ---------------------------------------------------------------------------
// linear

template <class T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_defined(input, "linear", "input");
  require_defined(weight, "linear", "weight");
  require_rank(input.shape(), 2, "linear", "input");
  require_rank(weight.shape(), 2, "linear", "weight");
  const std::size_t n = input.dim(0), f = input.dim(1), fo = weight.dim(0);
  if (weight.dim(1) != f) {
    throw ShapeError("linear: input " + shape_str(input.shape()) + " incompatible with weight " +
                     shape_str(weight.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != fo)) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(fo) + " outputs");
  }
  const T* x = input.ptr();
  const T* w = weight.ptr();
  const T* b = bias.defined() ? bias.ptr() : nullptr;
  std::vector<T> out(n * fo);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < fo; ++o) {
      T acc = b ? b[o] : T{0};
      for (std::size_t k = 0; k < f; ++k) acc += x[s * f + k] * w[o * f + k];
      out[s * fo + o] = acc;
    }
  return detail::make_result<T>(
      {n, fo}, std::move(out), "linear", {input, weight, bias},
      [=](std::span<const T> g, std::span<const T>) {
        const T* xv = input.ptr();
        const T* wv = weight.ptr();
        if (input.requires_grad()) {
          auto gx = detail::grad_buffer(input);
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t o = 0; o < fo; ++o) {
              const T go = g[s * fo + o];
              for (std::size_t k = 0; k < f; ++k) gx[s * f + k] += go * wv[o * f + k];
            }
        }
        if (weight.requires_grad()) {
          auto gw = detail::grad_buffer(weight);
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t o = 0; o < fo; ++o) {
              const T go = g[s * fo + o];
              for (std::size_t k = 0; k < f; ++k) gw[o * f + k] += go * xv[s * f + k];
            }
        }
        if (bias.requires_grad()) {
          auto gb = detail::grad_buffer(bias);
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t o = 0; o < fo; ++o) gb[o] += g[s * fo + o];
        }
      });
}

// ---------------------------------------------------------------------------
// channel concat / slice / max

template <class T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b) {
  if (!b.defined()) return a;
  if (!a.defined()) return b;
  require_rank(a.shape(), 4, "channel_concat", "a");
  require_rank(b.shape(), 4, "channel_concat", "b");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("channel_concat: spatial/batch mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<T> out(n * (ca + cb) * hw);
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.ptr() + s * ca * hw, ca * hw, out.data() + s * (ca + cb) * hw);
    std::copy_n(b.ptr() + s * cb * hw, cb * hw, out.data() + (s * (ca + cb) + ca) * hw);
  }
  return detail::make_result<T>(
      {n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), "channel_concat", {a, b},
      [=](std::span<const T> g, std::span<const T>) {
        if (a.requires_grad()) {
          auto ga = detail::grad_buffer(a);
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t i = 0; i < ca * hw; ++i) ga[s * ca * hw + i] += g[s * (ca + cb) * hw + i];
        }
        if (b.requires_grad()) {
          auto gb = detail::grad_buffer(b);
          for (std::size_t s = 0; s < n; ++s)
            for (std::size_t i = 0; i < cb * hw; ++i)
              gb[s * cb * hw + i] += g[(s * (ca + cb) + ca) * hw + i];
        }
      });
}

template <class T>
Tensor<T> channel_slice(const Tensor<T>& input, std::size_t start, std::size_t count) {
  require_defined(input, "channel_slice", "input");
  require_rank(input.shape(), 4, "channel_slice", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  if (count == 0 || start + count > c) {
    throw ShapeError("channel_slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + std::to_string(c) + " channels");
  }
  std::vector<T> out(n * count * hw);
  for (std::size_t s = 0; s < n; ++s)
    std::copy_n(input.ptr() + (s * c + start) * hw, count * hw, out.data() + s * count * hw);
  return detail::make_result<T>(
      {n, count, input.dim(2), input.dim(3)}, std::move(out), "channel_slice", {input},
      [=](std::span<const T> g, std::span<const T>) {
        auto gx = detail::grad_buffer(input);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t i = 0; i < count * hw; ++i) gx[(s * c + start) * hw + i] += g[s * count * hw + i];
      });
}

template <class T>
std::pair<Tensor<T>, Tensor<T>> channel_split(const Tensor<T>& input, std::size_t first) {
  require_rank(input.shape(), 4, "channel_split", "input");
  return {channel_slice(input, 0, first), channel_slice(input, first, input.dim(1) - first)};
}

template <class T>
Tensor<T> channel_max(const Tensor<T>& input) {
  require_defined(input, "channel_max", "input");
  require_rank(input.shape(), 4, "channel_max", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  const T* x = input.ptr();
  std::vector<T> out(n * hw);
  std::vector<std::uint32_t> arg(n * hw, 0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t q = 0; q < hw; ++q) out[s * hw + q] = x[s * c * hw + q];
    for (std::size_t ch = 1; ch < c; ++ch)
      for (std::size_t q = 0; q < hw; ++q) {
        const T v = x[(s * c + ch) * hw + q];
        if (v > out[s * hw + q]) {
          out[s * hw + q] = v;
          arg[s * hw + q] = static_cast<std::uint32_t>(ch);
        }
      }
  }
  return detail::make_result<T>(
      {n, 1, input.dim(2), input.dim(3)}, std::move(out), "channel_max", {input},
      [=, arg = std::move(arg)](std::span<const T> g, std::span<const T>) {
        auto gx = detail::grad_buffer(input);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t q = 0; q < hw; ++q) gx[(s * c + arg[s * hw + q]) * hw + q] += g[s * hw + q];
      });
}

// ---------------------------------------------------------------------------
// broadcasting elementwise

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcastable");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

namespace {

// Strides of `s` expressed in the index space of `out` (0 on broadcast axes).
std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<std::size_t> st(r, 0);
  std::size_t acc = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    const std::size_t oi = i + (r - s.size());
    st[oi] = s[i] == 1 ? 0 : acc;
    acc *= s[i];
  }
  return st;
}

// Calls fn(out_index, a_offset, b_offset) over the output in row-major order.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& fn) {
  const std::size_t r = out.size();
  const std::size_t total = shape_numel(out);
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < total; ++i) {
    fn(i, oa, ob);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out[d]) break;
      oa -= sa[d] * out[d];
      ob -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

}  // namespace

template <class T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, Binary kind) {
  require_defined(a, "elementwise", "a");
  require_defined(b, "elementwise", "b");
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const T* av = a.ptr();
  const T* bv = b.ptr();
  std::vector<T> out(shape_numel(out_shape));
  const bool same = a.shape() == b.shape();
  switch (kind) {
    case Binary::add:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
          out[i] = av[ia] + bv[ib];
        });
      }
      break;
    case Binary::sub:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
          out[i] = av[ia] - bv[ib];
        });
      }
      break;
    case Binary::mul:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
          out[i] = av[ia] * bv[ib];
        });
      }
      break;
  }
  const char* name = kind == Binary::add ? "add" : kind == Binary::sub ? "sub" : "mul";
  return detail::make_result<T>(
      out_shape, std::move(out), name, {a, b},
      [=](std::span<const T> g, std::span<const T>) {
        T* ga = a.requires_grad() ? detail::grad_buffer(a).data() : nullptr;
        T* gb = b.requires_grad() ? detail::grad_buffer(b).data() : nullptr;
        const T* a_ = a.ptr();
        const T* b_ = b.ptr();
        const T sign_b = kind == Binary::sub ? T{-1} : T{1};
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
          if (kind == Binary::mul) {
            if (ga) ga[ia] += g[i] * b_[ib];
            if (gb) gb[ib] += g[i] * a_[ia];
          } else {
            if (ga) ga[ia] += g[i];
            if (gb) gb[ib] += sign_b * g[i];
          }
        });
      });
}

template <class T>
Tensor<T> scale(const Tensor<T>& input, T factor) {
  require_defined(input, "scale", "input");
  const auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return detail::make_result<T>(input.shape(), std::move(out), "scale", {input},
                                [=](std::span<const T> g, std::span<const T>) {
                                  auto gx = detail::grad_buffer(input);
                                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                                });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape) {
  require_defined(input, "reshape", "input");
  if (shape_numel(shape) != input.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(input.shape()) + " as " + shape_str(shape));
  }
  std::vector<T> out(input.data().begin(), input.data().end());
  return detail::make_result<T>(std::move(shape), std::move(out), "reshape", {input},
                                [=](std::span<const T> g, std::span<const T>) {
                                  auto gx = detail::grad_buffer(input);
                                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                                });
}

template <class T>
Tensor<T> sum(const Tensor<T>& input) {
  require_defined(input, "sum", "input");
  T acc{0};
  for (T v : input.data()) acc += v;
  return detail::make_result<T>({1}, {acc}, "sum", {input},
                                [=](std::span<const T> g, std::span<const T>) {
                                  auto gx = detail::grad_buffer(input);
                                  for (auto& v : gx) v += g[0];
                                });
}

template <class T>
Tensor<T> mean(const Tensor<T>& input) {
  require_defined(input, "mean", "input");
  return scale(sum(input), T{1} / static_cast<T>(input.numel()));
}

#define SPARTAN_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                            const Conv2dOptions&);                                             \
  template Tensor<T> gap(const Tensor<T>&);                                                    \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                 Tensor<T>&, Tensor<T>&, const BatchNormOptions&);             \
  template Tensor<T> layernorm_channels(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                        double);                                               \
  template Tensor<T> activation(const Tensor<T>&, Activation);                                 \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> channel_concat(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> channel_slice(const Tensor<T>&, std::size_t, std::size_t);                \
  template std::pair<Tensor<T>, Tensor<T>> channel_split(const Tensor<T>&, std::size_t);       \
  template Tensor<T> channel_max(const Tensor<T>&);                                            \
  template Tensor<T> elementwise(const Tensor<T>&, const Tensor<T>&, Binary);                  \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> mean(const Tensor<T>&);

SPARTAN_INSTANTIATE_OPS(float)
SPARTAN_INSTANTIATE_OPS(double)

}  // namespace spartan
