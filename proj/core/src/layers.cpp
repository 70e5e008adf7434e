#include "wafer/layers.hpp"

#include <Eigen/Core>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <algorithm>
#include <cmath>
#include <limits>

#include "wafer/error.hpp"
#include "wafer/random.hpp"

namespace wafer::nn {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
template <typename T>
using CVec = Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

// ---- convolution ----------------------------------------------------------

struct ConvGeom {
  std::size_t n, h, w, c, kh, kw, f, pad_top, pad_left;
  std::size_t k() const { return kh * kw * c; }
};

ConvGeom conv_geom(const Shape& x, const Shape& kernels) {
  require(x.size() == 4, "conv2d_same expects [N,H,W,C] input, got " + shape_string(x));
  require(kernels.size() == 4, "conv2d_same expects kh x kw x C x F kernels");
  require(kernels[2] == x[3], "conv2d_same channel mismatch: input has " + std::to_string(x[3]) +
                                  " channels, kernels expect " + std::to_string(kernels[2]));
  return {x[0], x[1], x[2], x[3], kernels[0], kernels[1], kernels[3], (kernels[0] - 1) / 2,
          (kernels[1] - 1) / 2};
}

// Unfolds `count` consecutive samples into rows of kh*kw*C patch values.
// Interior patches copy a whole kernel row (kw*C contiguous values) at once.
template <typename T>
void im2col(const T* x, std::size_t count, const ConvGeom& g, MatR<T>& col) {
  col.resize(count * g.h * g.w, g.k());
  const std::size_t sample = g.h * g.w * g.c;
  const std::size_t span = g.kw * g.c;
  for (std::size_t s = 0; s < count; ++s) {
    const T* xs = x + s * sample;
    for (std::size_t i = 0; i < g.h; ++i) {
      T* rows = col.data() + (s * g.h + i) * g.w * g.k();
      for (std::size_t p = 0; p < g.kh; ++p) {
        const auto si =
            static_cast<std::ptrdiff_t>(i + p) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(g.h)) {
          for (std::size_t j = 0; j < g.w; ++j) {
            std::fill_n(rows + j * g.k() + p * span, span, T{0});
          }
          continue;
        }
        const T* src_row = xs + static_cast<std::size_t>(si) * g.w * g.c;
        for (std::size_t j = 0; j < g.w; ++j) {
          T* dst = rows + j * g.k() + p * span;
          if (j >= g.pad_left && j + g.kw - g.pad_left <= g.w) {
            std::copy_n(src_row + (j - g.pad_left) * g.c, span, dst);
            continue;
          }
          for (std::size_t q = 0; q < g.kw; ++q) {
            const auto sj =
                static_cast<std::ptrdiff_t>(j + q) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(g.w)) {
              std::fill_n(dst + q * g.c, g.c, T{0});
            } else {
              std::copy_n(src_row + static_cast<std::size_t>(sj) * g.c, g.c, dst + q * g.c);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const MatR<T>& col, std::size_t count, const ConvGeom& g, T* dx) {
  const std::size_t sample = g.h * g.w * g.c;
  const std::size_t span = g.kw * g.c;
  for (std::size_t s = 0; s < count; ++s) {
    T* dxs = dx + s * sample;
    for (std::size_t i = 0; i < g.h; ++i) {
      const T* rows = col.data() + (s * g.h + i) * g.w * g.k();
      for (std::size_t p = 0; p < g.kh; ++p) {
        const auto si =
            static_cast<std::ptrdiff_t>(i + p) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (si < 0 || si >= static_cast<std::ptrdiff_t>(g.h)) continue;
        T* dst_row = dxs + static_cast<std::size_t>(si) * g.w * g.c;
        for (std::size_t j = 0; j < g.w; ++j) {
          const T* src = rows + j * g.k() + p * span;
          if (j >= g.pad_left && j + g.kw - g.pad_left <= g.w) {
            T* dst = dst_row + (j - g.pad_left) * g.c;
            for (std::size_t t = 0; t < span; ++t) dst[t] += src[t];
            continue;
          }
          for (std::size_t q = 0; q < g.kw; ++q) {
            const auto sj =
                static_cast<std::ptrdiff_t>(j + q) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(g.w)) continue;
            T* dst = dst_row + static_cast<std::size_t>(sj) * g.c;
            for (std::size_t ch = 0; ch < g.c; ++ch) dst[ch] += src[q * g.c + ch];
          }
        }
      }
    }
  }
}

// Samples per im2col block, keeping the unfolded matrix near 64 MB of floats.
std::size_t conv_chunk(const ConvGeom& g) {
  constexpr std::size_t kBudget = std::size_t{16} << 20;
  return std::clamp<std::size_t>(kBudget / std::max<std::size_t>(g.h * g.w * g.k(), 1), 1,
                                 std::max<std::size_t>(g.n, 1));
}

template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
  const ConvGeom g = conv_geom(x.shape(), kernels.shape());
  require(bias.size() == g.f, "conv2d_same bias must have F entries");
  Tensor<T> y({g.n, g.h, g.w, g.f});
  CMapR<T> wmat(kernels.data(), g.k(), g.f);
  CVec<T> b(bias.data(), g.f);
  MatR<T> col;
  const std::size_t chunk = conv_chunk(g);
  for (std::size_t s = 0; s < g.n; s += chunk) {
    const std::size_t count = std::min(chunk, g.n - s);
    im2col(x.data() + s * g.h * g.w * g.c, count, g, col);
    MapR<T> out(y.data() + s * g.h * g.w * g.f, count * g.h * g.w, g.f);
    out.noalias() = col * wmat;
    out.rowwise() += b;
  }
  return y;
}

// Accumulates kernel/bias gradients; the input gradient is only formed when
// `want_dx` is set.
template <typename T>
Tensor<T> conv_backward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& dy,
                        Tensor<T>& dk, Tensor<T>& db, bool want_dx) {
  const ConvGeom g = conv_geom(x.shape(), kernels.shape());
  Tensor<T> dx(want_dx ? x.shape() : Shape{0});
  CMapR<T> wmat(kernels.data(), g.k(), g.f);
  MapR<T> dw(dk.data(), g.k(), g.f);
  MapR<T> dbv(db.data(), 1, g.f);
  MatR<T> col;
  MatR<T> dcol;
  const std::size_t chunk = conv_chunk(g);
  for (std::size_t s = 0; s < g.n; s += chunk) {
    const std::size_t count = std::min(chunk, g.n - s);
    im2col(x.data() + s * g.h * g.w * g.c, count, g, col);
    CMapR<T> dout(dy.data() + s * g.h * g.w * g.f, count * g.h * g.w, g.f);
    dw.noalias() += col.transpose() * dout;
    dbv += dout.colwise().sum();
    if (want_dx) {
      dcol.noalias() = dout * wmat.transpose();
      col2im_add(dcol, count, g, dx.data() + s * g.h * g.w * g.c);
    }
  }
  return dx;
}

// ---- transposed convolution (2x2 kernel, stride 2) ------------------------

struct TconvGeom {
  std::size_t n, h, w, c, f;
};

TconvGeom tconv_geom(const Shape& x, const Shape& kernels) {
  require(x.size() == 4, "transposed_conv_s2 expects [N,h,w,C] input, got " + shape_string(x));
  require(kernels.size() == 4 && kernels[0] == 2 && kernels[1] == 2,
          "transposed_conv_s2 expects 2 x 2 x C x F kernels");
  require(kernels[2] == x[3], "transposed_conv_s2 channel mismatch: input has " +
                                  std::to_string(x[3]) + " channels, kernels expect " +
                                  std::to_string(kernels[2]));
  return {x[0], x[1], x[2], x[3], kernels[3]};
}

// Rearranges K[p][q][c][f] into a C x 4F matrix with column (p*2+q)*F+f.
template <typename T>
MatR<T> tconv_matrix(const Tensor<T>& kernels, const TconvGeom& g) {
  MatR<T> m(g.c, 4 * g.f);
  for (std::size_t pq = 0; pq < 4; ++pq) {
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t f = 0; f < g.f; ++f) {
        m(c, pq * g.f + f) = kernels[(pq * g.c + c) * g.f + f];
      }
    }
  }
  return m;
}

template <typename T>
Tensor<T> tconv_forward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
  const TconvGeom g = tconv_geom(x.shape(), kernels.shape());
  require(bias.size() == g.f, "transposed_conv_s2 bias must have F entries");
  const MatR<T> kmat = tconv_matrix(kernels, g);
  Tensor<T> y({g.n, 2 * g.h, 2 * g.w, g.f});
  MatR<T> prod;
  for (std::size_t s = 0; s < g.n; ++s) {
    CMapR<T> xin(x.data() + s * g.h * g.w * g.c, g.h * g.w, g.c);
    prod.noalias() = xin * kmat;
    T* out = y.data() + s * 4 * g.h * g.w * g.f;
    for (std::size_t i = 0; i < g.h; ++i) {
      for (std::size_t j = 0; j < g.w; ++j) {
        for (std::size_t p = 0; p < 2; ++p) {
          for (std::size_t q = 0; q < 2; ++q) {
            T* dst = out + ((2 * i + p) * 2 * g.w + (2 * j + q)) * g.f;
            const T* src = prod.data() + (i * g.w + j) * 4 * g.f + (p * 2 + q) * g.f;
            for (std::size_t f = 0; f < g.f; ++f) dst[f] = src[f] + bias[f];
          }
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> tconv_backward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& dy,
                         Tensor<T>& dk, Tensor<T>& db) {
  const TconvGeom g = tconv_geom(x.shape(), kernels.shape());
  const MatR<T> kmat = tconv_matrix(kernels, g);
  MatR<T> dkmat = MatR<T>::Zero(g.c, 4 * g.f);
  MatR<T> dprod(g.h * g.w, 4 * g.f);
  Tensor<T> dx(x.shape());
  for (std::size_t s = 0; s < g.n; ++s) {
    const T* dout = dy.data() + s * 4 * g.h * g.w * g.f;
    for (std::size_t i = 0; i < g.h; ++i) {
      for (std::size_t j = 0; j < g.w; ++j) {
        for (std::size_t p = 0; p < 2; ++p) {
          for (std::size_t q = 0; q < 2; ++q) {
            const T* src = dout + ((2 * i + p) * 2 * g.w + (2 * j + q)) * g.f;
            T* dst = dprod.data() + (i * g.w + j) * 4 * g.f + (p * 2 + q) * g.f;
            for (std::size_t f = 0; f < g.f; ++f) {
              dst[f] = src[f];
              db[f] += src[f];
            }
          }
        }
      }
    }
    CMapR<T> xin(x.data() + s * g.h * g.w * g.c, g.h * g.w, g.c);
    dkmat.noalias() += xin.transpose() * dprod;
    MapR<T> dxin(dx.data() + s * g.h * g.w * g.c, g.h * g.w, g.c);
    dxin.noalias() = dprod * kmat.transpose();
  }
  for (std::size_t pq = 0; pq < 4; ++pq) {
    for (std::size_t c = 0; c < g.c; ++c) {
      for (std::size_t f = 0; f < g.f; ++f) dk[(pq * g.c + c) * g.f + f] += dkmat(c, pq * g.f + f);
    }
  }
  return dx;
}

// ---- pooling ----------------------------------------------------------------

template <typename T>
PoolResult<T> pool_forward(const Tensor<T>& x) {
  require(x.rank() == 4, "maxpool_2x2 expects [N,H,W,C] input, got " + shape_string(x.shape()));
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0,
          "maxpool_2x2 needs even spatial dimensions, got " + shape_string(x.shape()));
  PoolResult<T> r{Tensor<T>({n, h / 2, w / 2, c}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < h / 2; ++i) {
      for (std::size_t j = 0; j < w / 2; ++j) {
        for (std::size_t ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = ((s * h + 2 * i) * w + 2 * j) * c + ch;
          for (std::size_t p = 0; p < 2; ++p) {
            for (std::size_t q = 0; q < 2; ++q) {
              const std::size_t idx = ((s * h + 2 * i + p) * w + 2 * j + q) * c + ch;
              if (x[idx] > x[best]) best = idx;
            }
          }
          r.output[o] = x[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

// ---- dense ------------------------------------------------------------------

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  const std::size_t n = x.dim(0);
  const std::size_t in = x.size() / std::max<std::size_t>(n, 1);
  const std::size_t out = weights.dim(0);
  require(weights.rank() == 2 && weights.dim(1) == in,
          "dense: input of width " + std::to_string(in) + " does not match weights " +
              shape_string(weights.shape()));
  require(bias.size() == out, "dense: bias must have " + std::to_string(out) + " entries");
  Tensor<T> y({n, out});
  MapR<T> ym(y.data(), n, out);
  ym.noalias() = CMapR<T>(x.data(), n, in) * CMapR<T>(weights.data(), out, in).transpose();
  ym.rowwise() += CVec<T>(bias.data(), out);
  return y;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& dy,
                         Tensor<T>& dw, Tensor<T>& db, bool want_dx) {
  const std::size_t n = x.dim(0);
  const std::size_t in = x.size() / std::max<std::size_t>(n, 1);
  const std::size_t out = weights.dim(0);
  CMapR<T> dym(dy.data(), n, out);
  MapR<T>(dw.data(), out, in).noalias() += dym.transpose() * CMapR<T>(x.data(), n, in);
  MapR<T>(db.data(), 1, out) += dym.colwise().sum();
  if (!want_dx) return Tensor<T>(Shape{0});
  Tensor<T> dx(x.shape());
  MapR<T>(dx.data(), n, in).noalias() = dym * CMapR<T>(weights.data(), out, in);
  return dx;
}

// ---- layers -------------------------------------------------------------------

Shape batched(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

template <typename T>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const noexcept { return spec_; }
  virtual Shape output_shape(const Shape& sample) const = 0;
  virtual Tensor<T> forward(Tensor<T> x, bool record) = 0;
  // want_dx == false lets the first layer of a network skip its input
  // gradient; the returned tensor is then empty.
  virtual Tensor<T> backward(const Tensor<T>& dy, bool want_dx) = 0;
  virtual std::vector<Parameter<T>*> params() { return {}; }

 protected:
  void need_input() const {
    if (!recorded_) {
      throw Error("backward through layer '" + spec_.name + "' without a recorded forward pass");
    }
  }
  void keep(Tensor<T>&& x) {
    input_ = std::move(x);
    recorded_ = true;
  }

  LayerSpec spec_;
  Tensor<T> input_;
  bool recorded_ = false;
};

namespace {

template <typename T>
Parameter<T> make_param(const std::string& name, Shape shape, std::size_t fan_in) {
  Tensor<T> v(shape);
  Tensor<T> g(std::move(shape));
  return Parameter<T>{name, std::move(v), std::move(g), fan_in};
}

template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  explicit ConvLayer(LayerSpec s)
      : Layer<T>(s),
        w_(make_param<T>(s.name + ".weight", {s.kernel_h, s.kernel_w, s.in, s.out},
                         s.kernel_h * s.kernel_w * s.in)),
        b_(make_param<T>(s.name + ".bias", {s.out}, s.kernel_h * s.kernel_w * s.in)) {}

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 3 && in[2] == this->spec_.in,
            "layer '" + this->spec_.name + "' expects H x W x " + std::to_string(this->spec_.in) +
                " input, got " + shape_string(in));
    return {in[0], in[1], this->spec_.out};
  }
  Tensor<T> forward(Tensor<T> x, bool record) override {
    auto y = conv_forward(x, w_.value, b_.value);
    if (record) this->keep(std::move(x));
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool want_dx) override {
    this->need_input();
    return conv_backward(this->input_, w_.value, dy, w_.grad, b_.grad, want_dx);
  }
  std::vector<Parameter<T>*> params() override { return {&w_, &b_}; }

 private:
  Parameter<T> w_, b_;
};

template <typename T>
class TconvLayer final : public Layer<T> {
 public:
  explicit TconvLayer(LayerSpec s)
      : Layer<T>(s),
        w_(make_param<T>(s.name + ".weight", {2, 2, s.in, s.out}, s.in)),
        b_(make_param<T>(s.name + ".bias", {s.out}, s.in)) {}

  Shape output_shape(const Shape& in) const override {
    require(in.size() == 3 && in[2] == this->spec_.in,
            "layer '" + this->spec_.name + "' expects h x w x " + std::to_string(this->spec_.in) +
                " input, got " + shape_string(in));
    return {2 * in[0], 2 * in[1], this->spec_.out};
  }
  Tensor<T> forward(Tensor<T> x, bool record) override {
    auto y = tconv_forward(x, w_.value, b_.value);
    if (record) this->keep(std::move(x));
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    this->need_input();
    return tconv_backward(this->input_, w_.value, dy, w_.grad, b_.grad);
  }
  std::vector<Parameter<T>*> params() override { return {&w_, &b_}; }

 private:
  Parameter<T> w_, b_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  explicit DenseLayer(LayerSpec s)
      : Layer<T>(s),
        w_(make_param<T>(s.name + ".weight", {s.out, s.in}, s.in)),
        b_(make_param<T>(s.name + ".bias", {s.out}, s.in)) {}

  Shape output_shape(const Shape& in) const override {
    require(shape_size(in) == this->spec_.in,
            "layer '" + this->spec_.name + "' expects " + std::to_string(this->spec_.in) +
                " inputs, got " + shape_string(in));
    return {this->spec_.out};
  }
  Tensor<T> forward(Tensor<T> x, bool record) override {
    auto y = dense_forward(x, w_.value, b_.value);
    if (record) this->keep(std::move(x));
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool want_dx) override {
    this->need_input();
    return dense_backward(this->input_, w_.value, dy, w_.grad, b_.grad, want_dx);
  }
  std::vector<Parameter<T>*> params() override { return {&w_, &b_}; }

 private:
  Parameter<T> w_, b_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(Tensor<T> x, bool record) override {
    for (auto& v : x.values()) v = std::max(v, T{0});
    // The output doubles as the mask: y > 0 exactly where x > 0.
    if (record) this->keep(Tensor<T>(x));
    return x;
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    this->need_input();
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] = this->input_[i] > T{0} ? dx[i] : T{0};
    }
    return dx;
  }
};

template <typename T>
class PoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape output_shape(const Shape& in) const override {
    require(in.size() == 3 && in[0] % 2 == 0 && in[1] % 2 == 0,
            "layer '" + this->spec_.name + "' needs even H and W, got " + shape_string(in));
    return {in[0] / 2, in[1] / 2, in[2]};
  }
  Tensor<T> forward(Tensor<T> x, bool record) override {
    auto r = pool_forward(x);
    if (record) {
      in_shape_ = x.shape();
      argmax_ = std::move(r.argmax);
      this->recorded_ = true;
    }
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    this->need_input();
    Tensor<T> dx(in_shape_);
    for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += dy[o];
    return dx;
  }

 private:
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class FlattenLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape output_shape(const Shape& in) const override { return {shape_size(in)}; }
  Tensor<T> forward(Tensor<T> x, bool record) override {
    if (record) {
      in_shape_ = x.shape();
      this->recorded_ = true;
    }
    const std::size_t n = x.dim(0);
    const std::size_t width = x.size() / std::max<std::size_t>(n, 1);
    return std::move(x).reshaped({n, width});
  }
  Tensor<T> backward(const Tensor<T>& dy, bool) override {
    this->need_input();
    return dy.reshaped(in_shape_);
  }

 private:
  Shape in_shape_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::conv2d_same: return std::make_unique<ConvLayer<T>>(s);
    case LayerKind::transposed_conv_s2: return std::make_unique<TconvLayer<T>>(s);
    case LayerKind::dense: return std::make_unique<DenseLayer<T>>(s);
    case LayerKind::relu: return std::make_unique<ReluLayer<T>>(s);
    case LayerKind::maxpool2x2: return std::make_unique<PoolLayer<T>>(s);
    case LayerKind::flatten: return std::make_unique<FlattenLayer<T>>(s);
  }
  throw Error("unknown layer kind");
}

template <typename T>
Tensor<T> as_batch(const Tensor<T>& sample) {
  return sample.reshaped(batched(1, sample.shape()));
}

template <typename T>
Tensor<T> drop_batch(Tensor<T>&& t) {
  Shape s(t.shape().begin() + 1, t.shape().end());
  return std::move(t).reshaped(std::move(s));
}

}  // namespace

// ---- single-sample ops --------------------------------------------------------

template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias) {
  require(input.rank() == 3, "conv2d_same expects H x W x C input");
  return drop_batch(conv_forward(as_batch(input), kernels, bias));
}

template <typename T>
Tensor<T> transposed_conv_s2(const Tensor<T>& input, const Tensor<T>& kernels,
                             const Tensor<T>& bias) {
  require(input.rank() == 3, "transposed_conv_s2 expects h x w x C input");
  return drop_batch(tconv_forward(as_batch(input), kernels, bias));
}

template <typename T>
PoolResult<T> maxpool_2x2(const Tensor<T>& input) {
  require(input.rank() == 3, "maxpool_2x2 expects H x W x C input");
  auto r = pool_forward(as_batch(input));
  r.output = drop_batch(std::move(r.output));
  return r;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& t) {
  Tensor<T> out = t;
  for (auto& v : out.values()) v = std::max(v, T{0});
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require(logits.size() > 0, "softmax of an empty vector");
  const std::size_t k = logits.shape().back();
  require(k > 0, "softmax of an empty vector");
  Tensor<T> out = logits;
  for (std::size_t row = 0; row < out.size() / k; ++row) {
    auto v = out.values().subspan(row * k, k);
    const T mx = *std::ranges::max_element(v);
    T sum{0};
    for (auto& x : v) {
      x = std::exp(x - mx);
      sum += x;
    }
    for (auto& x : v) x /= sum;
  }
  return out;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias) {
  require(input.rank() == 1, "dense expects a vector input");
  return drop_batch(dense_forward(as_batch(input), weights, bias));
}

template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.shape() == target.shape(), "mse_loss shape mismatch " + shape_string(pred.shape()) +
                                              " vs " + shape_string(target.shape()));
  require(pred.size() > 0, "mse_loss of empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(pred.size()));
}

template <typename T>
T cross_entropy(const Tensor<T>& probs, const Tensor<T>& onehot) {
  require(probs.shape() == onehot.shape() && probs.rank() == 2,
          "cross_entropy expects equal n x K shapes");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  require(n > 0, "cross_entropy of an empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < k; ++j) row += probs[i * k + j];
    if (std::fabs(row - 1.0) > 1e-5) {
      throw InvalidArgument("cross_entropy: probability row " + std::to_string(i) +
                            " sums to " + std::to_string(row));
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double y = onehot[i * k + j];
      if (y != 0.0) acc += y * std::log(std::max<double>(probs[i * k + j], 1e-12));
    }
  }
  return static_cast<T>(-acc / static_cast<double>(n));
}

template <typename T>
LossAndGrad<T> mse_with_grad(const Tensor<T>& pred, const Tensor<T>& target) {
  LossAndGrad<T> r;
  r.loss = mse_loss(pred, target);
  r.grad = Tensor<T>(pred.shape());
  const T scale = T{2} / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) r.grad[i] = scale * (pred[i] - target[i]);
  return r;
}

template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require(logits.rank() == 2 && logits.dim(0) == labels.size(),
          "softmax_cross_entropy expects N x K logits and N labels");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  require(n > 0, "softmax_cross_entropy of an empty batch");
  LossAndGrad<T> r;
  r.probs = softmax(logits);
  r.grad = r.probs;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    require(labels[i] >= 0 && y < k, "label out of range in softmax_cross_entropy");
    acc += std::log(std::max<double>(r.probs[i * k + y], 1e-12));
    r.grad[i * k + y] -= T{1};
  }
  for (auto& g : r.grad.values()) g /= static_cast<T>(n);
  r.loss = static_cast<T>(-acc / static_cast<double>(n));
  return r;
}

// ---- LayerSpec ----------------------------------------------------------------

LayerSpec LayerSpec::conv(std::string name, std::size_t k, std::size_t in, std::size_t out) {
  return {LayerKind::conv2d_same, std::move(name), k, k, in, out};
}
LayerSpec LayerSpec::transposed_conv(std::string name, std::size_t in, std::size_t out) {
  return {LayerKind::transposed_conv_s2, std::move(name), 2, 2, in, out};
}
LayerSpec LayerSpec::dense(std::string name, std::size_t in, std::size_t out) {
  return {LayerKind::dense, std::move(name), 0, 0, in, out};
}
LayerSpec LayerSpec::relu(std::string name) { return {LayerKind::relu, std::move(name)}; }
LayerSpec LayerSpec::maxpool(std::string name) { return {LayerKind::maxpool2x2, std::move(name)}; }
LayerSpec LayerSpec::flatten(std::string name) { return {LayerKind::flatten, std::move(name)}; }

std::size_t LayerSpec::parameter_count() const noexcept {
  switch (kind) {
    case LayerKind::conv2d_same:
    case LayerKind::transposed_conv_s2: return kernel_h * kernel_w * in * out + out;
    case LayerKind::dense: return in * out + out;
    default: return 0;
  }
}

// ---- Sequential ---------------------------------------------------------------

template <typename T>
Sequential<T>::Sequential() = default;

template <typename T>
Sequential<T>::Sequential(std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
  for (const auto& s : specs_) layers_.push_back(make_layer<T>(s));
}

template <typename T>
Sequential<T>::Sequential(Sequential&&) noexcept = default;
template <typename T>
Sequential<T>& Sequential<T>::operator=(Sequential&&) noexcept = default;
template <typename T>
Sequential<T>::~Sequential() = default;

template <typename T>
Sequential<T> Sequential<T>::clone() const {
  Sequential out(specs_);
  auto src = parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value;
  return out;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, bool record) {
  Tensor<T> h = x;
  for (auto& layer : layers_) {
    h = layer->forward(std::move(h), record);
    h.check_finite("forward of layer '" + layer->spec().name + "'");
  }
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out, bool input_grad) {
  Tensor<T> g = grad_out;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    auto& layer = *layers_[k];
    const bool want_dx = k > 0 || input_grad;
    g = layer.backward(g, want_dx);
    const std::string where = "gradient of layer '" + layer.spec().name + "'";
    if (want_dx) g.check_finite(where);
    for (auto* p : layer.params()) p->grad.check_finite(where);
  }
  return g;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& l : layers_) {
    for (auto* p : l->params()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Sequential<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& l : layers_) {
    for (auto* p : l->params()) out.push_back(p);
  }
  return out;
}

template <typename T>
Parameter<T>* Sequential<T>::find(const std::string& name) {
  for (auto* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T{0});
}

template <typename T>
void Sequential<T>::init_he(std::uint64_t seed) {
  Rng rng(seed);
  for (auto* p : parameters()) {
    if (p->value.rank() == 1) {
      p->value.fill(T{0});
      continue;
    }
    boost::random::normal_distribution<double> dist(0.0,
                                                    std::sqrt(2.0 / static_cast<double>(p->fan_in)));
    for (auto& v : p->value.values()) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
void Sequential<T>::init_glorot_uniform(std::uint64_t seed) {
  Rng rng(seed);
  for (auto* p : parameters()) {
    const auto& sh = p->value.shape();
    if (sh.size() == 1) {
      p->value.fill(T{0});
      continue;
    }
    const double fans = sh.size() == 4 ? static_cast<double>(sh[0] * sh[1] * (sh[2] + sh[3]))
                                       : static_cast<double>(sh[0] + sh[1]);
    const double limit = std::sqrt(6.0 / fans);
    boost::random::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : p->value.values()) v = static_cast<T>(dist(rng));
  }
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& sample_shape) const {
  Shape s = sample_shape;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <typename T>
std::size_t Sequential<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : specs_) n += s.parameter_count();
  return n;
}

#define WAFER_INSTANTIATE(T)                                                                   \
  template class Layer<T>;                                                                     \
  template class Sequential<T>;                                                                \
  template Tensor<T> conv2d_same(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> transposed_conv_s2(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template PoolResult<T> maxpool_2x2(const Tensor<T>&);                                        \
  template Tensor<T> relu(const Tensor<T>&);                                                   \
  template Tensor<T> softmax(const Tensor<T>&);                                                \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template T mse_loss(const Tensor<T>&, const Tensor<T>&);                                     \
  template T cross_entropy(const Tensor<T>&, const Tensor<T>&);                                \
  template LossAndGrad<T> mse_with_grad(const Tensor<T>&, const Tensor<T>&);                   \
  template LossAndGrad<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);

WAFER_INSTANTIATE(float)
WAFER_INSTANTIATE(double)

#undef WAFER_INSTANTIATE

}  // namespace wafer::nn
