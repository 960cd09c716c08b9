#include "tapelab/nn.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

namespace tapelab::nn {
namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

using ConstMap = Eigen::Map<const Matrix>;
using GradMap = Eigen::Map<Matrix>;

Index weight_count(const LayerSpec& layer, Shape in) {
  return std::visit(Overloaded{
                        [&](const Conv1d& l) { return l.out_channels * in.channels * l.kernel; },
                        [&](const ConvTranspose1d& l) {
                          return l.out_channels * l.kernel * in.channels;
                        },
                        [&](const Dense& l) { return l.units * in.size(); },
                        [](const auto&) { return Index{0}; },
                    },
                    layer);
}

Index bias_count(const LayerSpec& layer) {
  return std::visit(Overloaded{
                        [](const Conv1d& l) { return l.out_channels; },
                        [](const ConvTranspose1d& l) { return l.out_channels; },
                        [](const Dense& l) { return l.bias ? l.units : Index{0}; },
                        [](const auto&) { return Index{0}; },
                    },
                    layer);
}

Index fan_in(const LayerSpec& layer, Shape in) {
  return std::visit(Overloaded{
                        [&](const Conv1d& l) { return in.channels * l.kernel; },
                        [&](const ConvTranspose1d& l) {
                          return std::max<Index>(1, in.channels * l.kernel / l.stride);
                        },
                        [&](const Dense&) { return in.size(); },
                        [](const auto&) { return Index{1}; },
                    },
                    layer);
}

Shape infer(const LayerSpec& layer, Shape in, std::size_t index) {
  auto fail = [&](const std::string& why) {
    throw ShapeError("layer " + std::to_string(index) + " (" + describe(layer) + "): " + why);
  };
  return std::visit(
      Overloaded{
          [&](const Conv1d& l) {
            if (l.kernel < 1 || l.stride < 1 || l.padding < 0 || l.out_channels < 1)
              fail("invalid hyperparameters");
            const Index span = in.length + 2 * l.padding - l.kernel;
            if (span < 0) fail("kernel longer than padded input of length " + std::to_string(in.length));
            return Shape{l.out_channels, span / l.stride + 1};
          },
          [&](const ConvTranspose1d& l) {
            if (l.kernel < 1 || l.stride < 1 || l.padding < 0 || l.out_channels < 1)
              fail("invalid hyperparameters");
            const Index len = (in.length - 1) * l.stride - 2 * l.padding + l.kernel;
            if (len < 1) fail("empty output");
            return Shape{l.out_channels, len};
          },
          [&](const Dense& l) {
            if (l.units < 1) fail("no units");
            return Shape{1, l.units};
          },
          [&](const MaxPool1d& l) {
            if (l.window < 1 || in.length / l.window < 1) fail("window larger than input");
            return Shape{in.channels, in.length / l.window};
          },
          [&](const AvgPool1d& l) {
            if (l.window < 1 || in.length / l.window < 1) fail("window larger than input");
            return Shape{in.channels, in.length / l.window};
          },
          [&](const Act&) { return in; },
          [&](const Dropout& l) {
            if (!(l.rate >= 0 && l.rate < 1)) fail("rate must be in [0, 1)");
            return in;
          },
          [&](const Reshape& l) {
            if (l.channels < 1 || in.size() % l.channels != 0)
              fail("size " + std::to_string(in.size()) + " not divisible into channels");
            return Shape{l.channels, in.size() / l.channels};
          },
      },
      layer);
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// ---- Conv1d -------------------------------------------------------------

Matrix conv_forward(const Conv1d& l, Shape in, Shape out, const double* p, const Matrix& x,
                    LayerCache* cache) {
  const Index batch = x.cols(), cin = in.channels, len = in.length, k = l.kernel;
  const Index lo = out.length, co = l.out_channels;
  Matrix col(cin * k, lo * batch);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < lo; ++t) {
      const Index j = b * lo + t;
      for (Index ci = 0; ci < cin; ++ci)
        for (Index q = 0; q < k; ++q) {
          const Index pos = t * l.stride + q - l.padding;
          col(ci * k + q, j) = (pos >= 0 && pos < len) ? x(ci * len + pos, b) : 0.0;
        }
    }
  const ConstMap w(p, co, cin * k);
  const Eigen::Map<const Vector> bias(p + co * cin * k, co);
  Matrix z;
  z.noalias() = w * col;
  Matrix y(co * lo, batch);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < lo; ++t)
      for (Index c = 0; c < co; ++c) y(c * lo + t, b) = z(c, b * lo + t) + bias(c);
  if (cache) cache->scratch = std::move(col);
  return y;
}

Matrix conv_backward(const Conv1d& l, Shape in, Shape out, const double* p, double* g,
                     const Matrix& gy, const LayerCache& cache, bool input_gradient) {
  const Index batch = gy.cols(), cin = in.channels, len = in.length, k = l.kernel;
  const Index lo = out.length, co = l.out_channels;
  Matrix gz(co, lo * batch);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < lo; ++t)
      for (Index c = 0; c < co; ++c) gz(c, b * lo + t) = gy(c * lo + t, b);
  const ConstMap w(p, co, cin * k);
  GradMap gw(g, co, cin * k);
  Eigen::Map<Vector> gb(g + co * cin * k, co);
  gw.noalias() += gz * cache.scratch.transpose();
  gb += gz.rowwise().sum();
  if (!input_gradient) return {};
  Matrix gcol;
  gcol.noalias() = w.transpose() * gz;
  Matrix gx = Matrix::Zero(cin * len, batch);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < lo; ++t) {
      const Index j = b * lo + t;
      for (Index ci = 0; ci < cin; ++ci)
        for (Index q = 0; q < k; ++q) {
          const Index pos = t * l.stride + q - l.padding;
          if (pos >= 0 && pos < len) gx(ci * len + pos, b) += gcol(ci * k + q, j);
        }
    }
  return gx;
}

// ---- ConvTranspose1d ----------------------------------------------------

Matrix convt_forward(const ConvTranspose1d& l, Shape in, Shape out, const double* p,
                     const Matrix& x, LayerCache* cache) {
  const Index batch = x.cols(), cin = in.channels, len = in.length, k = l.kernel;
  const Index lo = out.length, co = l.out_channels;
  Matrix xr(cin, len * batch);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < len; ++t)
      for (Index ci = 0; ci < cin; ++ci) xr(ci, b * len + t) = x(ci * len + t, b);
  const ConstMap w(p, co * k, cin);
  const Eigen::Map<const Vector> bias(p + co * k * cin, co);
  Matrix z;
  z.noalias() = w * xr;
  Matrix y(co * lo, batch);
  for (Index b = 0; b < batch; ++b)
    for (Index c = 0; c < co; ++c) y.col(b).segment(c * lo, lo).setConstant(bias(c));
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < len; ++t) {
      const Index j = b * len + t;
      for (Index c = 0; c < co; ++c)
        for (Index q = 0; q < k; ++q) {
          const Index pos = t * l.stride + q - l.padding;
          if (pos >= 0 && pos < lo) y(c * lo + pos, b) += z(c * k + q, j);
        }
    }
  if (cache) cache->scratch = std::move(xr);
  return y;
}

Matrix convt_backward(const ConvTranspose1d& l, Shape in, Shape out, const double* p, double* g,
                      const Matrix& gy, const LayerCache& cache, bool input_gradient) {
  const Index batch = gy.cols(), cin = in.channels, len = in.length, k = l.kernel;
  const Index lo = out.length, co = l.out_channels;
  Matrix gz(co * k, len * batch);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < len; ++t) {
      const Index j = b * len + t;
      for (Index c = 0; c < co; ++c)
        for (Index q = 0; q < k; ++q) {
          const Index pos = t * l.stride + q - l.padding;
          gz(c * k + q, j) = (pos >= 0 && pos < lo) ? gy(c * lo + pos, b) : 0.0;
        }
    }
  const ConstMap w(p, co * k, cin);
  GradMap gw(g, co * k, cin);
  Eigen::Map<Vector> gb(g + co * k * cin, co);
  gw.noalias() += gz * cache.scratch.transpose();
  for (Index c = 0; c < co; ++c) gb(c) += gy.middleRows(c * lo, lo).sum();
  if (!input_gradient) return {};
  Matrix gxr;
  gxr.noalias() = w.transpose() * gz;
  Matrix gx(cin * len, batch);
  for (Index b = 0; b < batch; ++b)
    for (Index t = 0; t < len; ++t)
      for (Index ci = 0; ci < cin; ++ci) gx(ci * len + t, b) = gxr(ci, b * len + t);
  return gx;
}

}  // namespace

std::string describe(const LayerSpec& layer) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Conv1d& l) {
                   os << "conv1d(" << l.out_channels << ", k=" << l.kernel << ", s=" << l.stride
                      << ", p=" << l.padding << ")";
                 },
                 [&](const ConvTranspose1d& l) {
                   os << "conv_transpose1d(" << l.out_channels << ", k=" << l.kernel
                      << ", s=" << l.stride << ", p=" << l.padding << ")";
                 },
                 [&](const Dense& l) { os << "dense(" << l.units << (l.bias ? "" : ", no bias") << ")"; },
                 [&](const MaxPool1d& l) { os << "maxpool1d(" << l.window << ")"; },
                 [&](const AvgPool1d& l) { os << "avgpool1d(" << l.window << ")"; },
                 [&](const Act& l) {
                   os << (l.fn == Activation::kRelu      ? "relu"
                          : l.fn == Activation::kSigmoid ? "sigmoid"
                                                         : "identity");
                 },
                 [&](const Dropout& l) { os << "dropout(" << l.rate << ")"; },
                 [&](const Reshape& l) { os << "reshape(" << l.channels << ")"; },
             },
             layer);
  return os.str();
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.input.channels < 1 || spec_.input.length < 1) throw ShapeError("empty input shape");
  shapes_.push_back(spec_.input);
  Index total = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    offsets_.push_back(total);
    total += weight_count(spec_.layers[i], shapes_.back()) + bias_count(spec_.layers[i]);
    shapes_.push_back(infer(spec_.layers[i], shapes_.back(), i));
  }
  parameters_ = Vector::Zero(total);
}

void Network::restore(Vector parameters, std::uint64_t init_seed) {
  if (parameters.size() != parameters_.size())
    throw ShapeError("network expects " + std::to_string(parameters_.size()) + " parameters, got " +
                     std::to_string(parameters.size()));
  parameters_ = std::move(parameters);
  init_seed_ = init_seed;
}

void Network::initialize(std::uint64_t seed) {
  init_seed_ = seed;
  std::mt19937_64 rng(seed);
  parameters_.setZero();
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const Index n = weight_count(spec_.layers[i], shapes_[i]);
    if (n == 0) continue;
    bool relu_next = false;
    for (std::size_t j = i + 1; j < spec_.layers.size(); ++j) {
      if (const auto* a = std::get_if<Act>(&spec_.layers[j])) {
        relu_next = a->fn == Activation::kRelu;
        break;
      }
      if (!std::holds_alternative<Reshape>(spec_.layers[j]) &&
          !std::holds_alternative<Dropout>(spec_.layers[j]))
        break;
    }
    const double limit =
        std::sqrt((relu_next ? 6.0 : 3.0) / static_cast<double>(fan_in(spec_.layers[i], shapes_[i])));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index k = 0; k < n; ++k) parameters_(offsets_[i] + k) = dist(rng);
  }
}

Matrix Network::forward(const Eigen::Ref<const Matrix>& input, Tape* tape, RunMode mode) const {
  if (input.rows() != input_shape().size())
    throw ShapeError("network input has " + std::to_string(input.rows()) + " rows, expected " +
                     std::to_string(input_shape().size()));
  if (tape) tape->layers.assign(spec_.layers.size(), {});
  Matrix x = input;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const Shape in = shapes_[i], out = shapes_[i + 1];
    const double* p = parameters_.data() + offsets_[i];
    LayerCache* cache = tape ? &tape->layers[i] : nullptr;
    Matrix y = std::visit(
        Overloaded{
            [&](const Conv1d& l) { return conv_forward(l, in, out, p, x, cache); },
            [&](const ConvTranspose1d& l) { return convt_forward(l, in, out, p, x, cache); },
            [&](const Dense& l) -> Matrix {
              const ConstMap w(p, l.units, in.size());
              if (cache) cache->input = std::move(x);
              const Matrix& xin = cache ? cache->input : x;
              Matrix y;
              y.noalias() = w * xin;
              if (l.bias) y.colwise() += Eigen::Map<const Vector>(p + l.units * in.size(), l.units);
              return y;
            },
            [&](const MaxPool1d& l) -> Matrix {
              const Index batch = x.cols(), lo = out.length;
              Matrix y(out.size(), batch);
              std::vector<Index> arg(static_cast<std::size_t>(out.size() * batch));
              for (Index b = 0; b < batch; ++b)
                for (Index c = 0; c < in.channels; ++c)
                  for (Index t = 0; t < lo; ++t) {
                    const Index base = c * in.length + t * l.window;
                    Index best = base;
                    for (Index q = 1; q < l.window; ++q)
                      if (x(base + q, b) > x(best, b)) best = base + q;
                    y(c * lo + t, b) = x(best, b);
                    arg[static_cast<std::size_t>(b * out.size() + c * lo + t)] = best;
                  }
              if (cache) cache->argmax = std::move(arg);
              return y;
            },
            [&](const AvgPool1d& l) -> Matrix {
              const Index lo = out.length;
              const double scale = 1.0 / static_cast<double>(l.window);
              Matrix y(out.size(), x.cols());
              for (Index c = 0; c < in.channels; ++c)
                for (Index t = 0; t < lo; ++t)
                  y.row(c * lo + t) =
                      x.middleRows(c * in.length + t * l.window, l.window).colwise().sum() * scale;
              return y;
            },
            [&](const Act& l) -> Matrix {
              switch (l.fn) {
                case Activation::kRelu: x = x.cwiseMax(0.0); break;
                case Activation::kSigmoid: x = (1.0 + (-x.array()).exp()).inverse().matrix(); break;
                case Activation::kNone: break;
              }
              if (cache) cache->output = x;
              return std::move(x);
            },
            [&](const Dropout& l) -> Matrix {
              if (!mode.training || l.rate == 0.0) return std::move(x);
              std::mt19937_64 rng(mix(mode.dropout_seed ^ mix(i)));
              std::uniform_real_distribution<double> u(0.0, 1.0);
              Matrix mask(x.rows(), x.cols());
              const double keep = 1.0 / (1.0 - l.rate);
              for (Index k = 0; k < mask.size(); ++k) mask(k) = u(rng) >= l.rate ? keep : 0.0;
              x.array() *= mask.array();
              if (cache) cache->scratch = std::move(mask);
              return std::move(x);
            },
            [&](const Reshape&) -> Matrix { return std::move(x); },
        },
        spec_.layers[i]);
    x = std::move(y);
  }
  return x;
}

Matrix Network::backward(const Eigen::Ref<const Matrix>& grad_output, const Tape& tape,
                         Eigen::Ref<Vector> gradient, bool input_gradient) const {
  if (tape.layers.size() != spec_.layers.size()) throw InvalidArgument("backward: tape mismatch");
  if (gradient.size() != parameter_count()) throw InvalidArgument("backward: gradient size");
  // Without an input gradient the sweep ends at the first layer holding parameters.
  std::size_t stop = 0;
  if (!input_gradient) {
    while (stop + 1 < spec_.layers.size() &&
           weight_count(spec_.layers[stop], shapes_[stop]) + bias_count(spec_.layers[stop]) == 0)
      ++stop;
  }
  Matrix g = grad_output;
  for (std::size_t ii = spec_.layers.size(); ii-- > stop;) {
    const bool need_gx = input_gradient || ii > stop;
    const Shape in = shapes_[ii], out = shapes_[ii + 1];
    const double* p = parameters_.data() + offsets_[ii];
    double* gp = gradient.data() + offsets_[ii];
    const LayerCache& cache = tape.layers[ii];
    Matrix gx = std::visit(
        Overloaded{
            [&](const Conv1d& l) { return conv_backward(l, in, out, p, gp, g, cache, need_gx); },
            [&](const ConvTranspose1d& l) {
              return convt_backward(l, in, out, p, gp, g, cache, need_gx);
            },
            [&](const Dense& l) -> Matrix {
              const ConstMap w(p, l.units, in.size());
              GradMap gw(gp, l.units, in.size());
              gw.noalias() += g * cache.input.transpose();
              if (l.bias) Eigen::Map<Vector>(gp + l.units * in.size(), l.units) += g.rowwise().sum();
              if (!need_gx) return {};
              Matrix gx;
              gx.noalias() = w.transpose() * g;
              return gx;
            },
            [&](const MaxPool1d&) -> Matrix {
              Matrix gx = Matrix::Zero(in.size(), g.cols());
              for (Index b = 0; b < g.cols(); ++b)
                for (Index o = 0; o < out.size(); ++o)
                  gx(cache.argmax[static_cast<std::size_t>(b * out.size() + o)], b) += g(o, b);
              return gx;
            },
            [&](const AvgPool1d& l) -> Matrix {
              const Index lo = out.length;
              const double scale = 1.0 / static_cast<double>(l.window);
              Matrix gx = Matrix::Zero(in.size(), g.cols());
              for (Index c = 0; c < in.channels; ++c)
                for (Index t = 0; t < lo; ++t)
                  gx.middleRows(c * in.length + t * l.window, l.window).rowwise() =
                      g.row(c * lo + t) * scale;
              return gx;
            },
            [&](const Act& l) -> Matrix {
              switch (l.fn) {
                case Activation::kRelu:
                  g.array() *= (cache.output.array() > 0.0).cast<double>();
                  break;
                case Activation::kSigmoid:
                  g.array() *= cache.output.array() * (1.0 - cache.output.array());
                  break;
                case Activation::kNone: break;
              }
              return std::move(g);
            },
            [&](const Dropout&) -> Matrix {
              if (cache.scratch.size() > 0) g.array() *= cache.scratch.array();
              return std::move(g);
            },
            [&](const Reshape&) -> Matrix { return std::move(g); },
        },
        spec_.layers[ii]);
    g = std::move(gx);
  }
  if (!input_gradient) return {};
  return g;
}

std::uint64_t checksum(const Vector& parameters) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(parameters.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(parameters.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace tapelab::nn
