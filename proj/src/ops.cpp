#include "gandetect/ops.hpp"

#include "gandetect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gandetect {

namespace {

std::string dims(Index a) { return std::to_string(a); }

struct ConvGeometry {
  Index channels, height, width;
  Index out_channels, kernel_h, kernel_w;
  Index out_h, out_w;
  int stride, padding;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                           int stride, int padding) {
  if (input.rank() != 3) {
    throw ContractViolation("conv2d: input must be C x H x W, got " + shape_string(input.shape()));
  }
  if (kernel.rank() != 4) {
    throw ContractViolation("conv2d: kernel must be O x C x Kh x Kw, got " +
                            shape_string(kernel.shape()));
  }
  if (stride < 1) throw ContractViolation("conv2d: stride must be positive");
  if (padding < 0) throw ContractViolation("conv2d: padding must be non-negative");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(2),
                 kernel.dim(3), 0, 0, stride, padding};
  if (kernel.dim(1) != g.channels) {
    throw ContractViolation("conv2d: kernel channel dimension " + dims(kernel.dim(1)) +
                            " does not match input channels " + dims(g.channels));
  }
  if (bias.rank() != 1 || bias.dim(0) != g.out_channels) {
    throw ContractViolation("conv2d: bias length " + shape_string(bias.shape()) +
                            " does not match output channels " + dims(g.out_channels));
  }
  if (g.kernel_h > g.height + 2 * padding) {
    throw ContractViolation("conv2d: kernel height " + dims(g.kernel_h) +
                            " exceeds padded input height " + dims(g.height + 2 * padding));
  }
  if (g.kernel_w > g.width + 2 * padding) {
    throw ContractViolation("conv2d: kernel width " + dims(g.kernel_w) +
                            " exceeds padded input width " + dims(g.width + 2 * padding));
  }
  g.out_h = (g.height + 2 * padding - g.kernel_h) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kernel_w) / stride + 1;
  return g;
}

// Rows are (c, ky, kx) in kernel memory order, columns are output pixels.
RowMatrix im2col(const Tensor& x, const ConvGeometry& g) {
  RowMatrix cols(g.channels * g.kernel_h * g.kernel_w, g.out_h * g.out_w);
  const double* src = x.data().data();
  Index row = 0;
  for (Index c = 0; c < g.channels; ++c) {
    const double* plane = src + c * g.height * g.width;
    for (Index ky = 0; ky < g.kernel_h; ++ky) {
      for (Index kx = 0; kx < g.kernel_w; ++kx, ++row) {
        double* dst = cols.row(row).data();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          double* out = dst + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(out, out + g.out_w, 0.0);
            continue;
          }
          const double* line = plane + iy * g.width;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            out[ox] = (ix < 0 || ix >= g.width) ? 0.0 : line[ix];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const RowMatrix& cols, const ConvGeometry& g, Tensor& dx) {
  double* dst = dx.data().data();
  Index row = 0;
  for (Index c = 0; c < g.channels; ++c) {
    double* plane = dst + c * g.height * g.width;
    for (Index ky = 0; ky < g.kernel_h; ++ky) {
      for (Index kx = 0; kx < g.kernel_w; ++kx, ++row) {
        const double* src = cols.row(row).data();
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          double* line = plane + iy * g.width;
          const double* in = src + oy * g.out_w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) line[ix] += in[ox];
          }
        }
      }
    }
  }
}

Tensor conv_forward(const RowMatrix& cols, const Tensor& kernel, const Tensor& bias,
                    const ConvGeometry& g) {
  Tensor out({g.out_channels, g.out_h, g.out_w});
  auto k = kernel.matrix(g.out_channels, g.channels * g.kernel_h * g.kernel_w);
  auto y = out.matrix(g.out_channels, g.out_h * g.out_w);
  y.noalias() = k * cols;
  y.colwise() += bias.data();
  return out;
}

void require_vector(const Tensor& t, const char* what) {
  if (t.rank() != 1) {
    throw ContractViolation(std::string(what) + " must be a vector, got " +
                            shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(what) + ": shape mismatch " + shape_string(a.shape()) +
                            " vs " + shape_string(b.shape()));
  }
}

double checked_norm(const Tensor& x, const char* what) {
  const double n = x.data().norm();
  if (!(n > kNormEpsilon)) {
    throw DegenerateInput(std::string(what) + ": vector norm " + std::to_string(n) +
                          " is below 1e-12");
  }
  return n;
}

void check_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_vector(x, "affine input");
  require_vector(b, "affine bias");
  if (w.rank() != 2) throw ContractViolation("affine weight must be M x N");
  if (w.dim(1) != x.dim(0)) {
    throw ContractViolation("affine: weight columns " + dims(w.dim(1)) +
                            " do not match input length " + dims(x.dim(0)));
  }
  if (w.dim(0) != b.dim(0)) {
    throw ContractViolation("affine: weight rows " + dims(w.dim(0)) +
                            " do not match bias length " + dims(b.dim(0)));
  }
}

Index clamp_index(Index i, Index n) { return std::clamp<Index>(i, 0, n - 1); }

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
  const ConvGeometry g = conv_geometry(input, kernel, bias, stride, padding);
  return conv_forward(im2col(input, g), kernel, bias, g);
}

Tensor relu(const Tensor& x) {
  return Tensor(x.shape(), x.data().cwiseMax(0.0));
}

Tensor global_average_pool(const Tensor& x) {
  if (x.rank() != 3) throw ContractViolation("global_average_pool: input must be C x H x W");
  const Index c = x.dim(0);
  return Tensor({c}, x.matrix(c, x.dim(1) * x.dim(2)).rowwise().mean());
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_affine(x, weight, bias);
  Eigen::VectorXd y = weight.matrix(weight.dim(0), weight.dim(1)) * x.data() + bias.data();
  return Tensor({bias.dim(0)}, std::move(y));
}

Tensor l2_normalize(const Tensor& x) {
  require_vector(x, "l2_normalize input");
  const double n = checked_norm(x, "l2_normalize");
  return Tensor(x.shape(), x.data() / n);
}

double cosine_similarity(const Tensor& u, const Tensor& v) {
  require_vector(u, "cosine_similarity u");
  require_same_shape(u, v, "cosine_similarity");
  const double nu = checked_norm(u, "cosine_similarity");
  const double nv = checked_norm(v, "cosine_similarity");
  return std::clamp(u.data().dot(v.data()) / (nu * nv), -1.0, 1.0);
}

Tensor pad_replicate(const Tensor& x, int padding) {
  if (x.rank() != 3) throw ContractViolation("pad_replicate: input must be C x H x W");
  if (padding < 0) throw ContractViolation("pad_replicate: padding must be non-negative");
  const Index c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor out({c, h + 2 * padding, w + 2 * padding});
  for (Index k = 0; k < c; ++k) {
    for (Index y = 0; y < h + 2 * padding; ++y) {
      const Index sy = clamp_index(y - padding, h);
      for (Index xx = 0; xx < w + 2 * padding; ++xx) {
        out.at(k, y, xx) = x.at(k, sy, clamp_index(xx - padding, w));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Var conv2d(Var input, Var kernel, Var bias, int stride, int padding) {
  Tape& tape = *input.tape;
  const ConvGeometry g =
      conv_geometry(input.value(), kernel.value(), bias.value(), stride, padding);
  RowMatrix cols = im2col(input.value(), g);
  Tensor out = conv_forward(cols, kernel.value(), bias.value(), g);
  if (!tape.recording()) return tape.record(std::move(out), {}, nullptr);
  const Tensor* k = &kernel.value();
  return tape.record(
      std::move(out), {input, kernel, bias},
      [g, k, cols = std::move(cols)](const Tensor& gout, const std::vector<Tensor*>& gin) {
        const Index patch = g.channels * g.kernel_h * g.kernel_w;
        auto dy = gout.matrix(g.out_channels, g.out_h * g.out_w);
        if (gin[1]) gin[1]->matrix(g.out_channels, patch).noalias() += dy * cols.transpose();
        if (gin[2]) gin[2]->data() += dy.rowwise().sum();
        if (gin[0]) {
          RowMatrix dcols = k->matrix(g.out_channels, patch).transpose() * dy;
          col2im_add(dcols, g, *gin[0]);
        }
      });
}

Var relu(Var x) {
  Tensor out = relu(x.value());
  const Tensor* in = &x.value();
  return x.tape->record(std::move(out), {x},
                        [in](const Tensor& g, const std::vector<Tensor*>& gin) {
                          gin[0]->data().array() +=
                              (in->data().array() > 0.0).select(g.data().array(), 0.0);
                        });
}

Var global_average_pool(Var x) {
  Tensor out = global_average_pool(x.value());
  const Index c = x.value().dim(0), hw = x.value().dim(1) * x.value().dim(2);
  return x.tape->record(std::move(out), {x},
                        [c, hw](const Tensor& g, const std::vector<Tensor*>& gin) {
                          auto dx = gin[0]->matrix(c, hw);
                          dx.colwise() += g.data() / static_cast<double>(hw);
                        });
}

Var affine(Var x, Var weight, Var bias) {
  Tensor out = affine(x.value(), weight.value(), bias.value());
  const Tensor* xin = &x.value();
  const Tensor* w = &weight.value();
  return x.tape->record(
      std::move(out), {x, weight, bias},
      [xin, w](const Tensor& g, const std::vector<Tensor*>& gin) {
        const Index m = w->dim(0), n = w->dim(1);
        if (gin[0]) gin[0]->data().noalias() += w->matrix(m, n).transpose() * g.data();
        if (gin[1]) gin[1]->matrix(m, n).noalias() += g.data() * xin->data().transpose();
        if (gin[2]) gin[2]->data() += g.data();
      });
}

Var l2_normalize(Var x) {
  Tensor out = l2_normalize(x.value());
  const double n = x.value().data().norm();
  Eigen::VectorXd y = out.data();
  return x.tape->record(std::move(out), {x},
                        [y = std::move(y), n](const Tensor& g, const std::vector<Tensor*>& gin) {
                          const double gy = g.data().dot(y);
                          gin[0]->data() += (g.data() - gy * y) / n;
                        });
}

Var cosine_similarity(Var u, Var v) {
  const double s = cosine_similarity(u.value(), v.value());
  const Eigen::VectorXd& a = u.value().data();
  const Eigen::VectorXd& b = v.value().data();
  const double na = a.norm(), nb = b.norm();
  return u.tape->record(
      Tensor::scalar(s), {u, v},
      [a, b, na, nb, s](const Tensor& g, const std::vector<Tensor*>& gin) {
        const double go = g.item();
        if (gin[0]) gin[0]->data() += go * (b / (na * nb) - s * a / (na * na));
        if (gin[1]) gin[1]->data() += go * (a / (na * nb) - s * b / (nb * nb));
      });
}

Var pad_replicate(Var x, int padding) {
  Tensor out = pad_replicate(x.value(), padding);
  const Index c = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2);
  return x.tape->record(
      std::move(out), {x}, [c, h, w, padding](const Tensor& g, const std::vector<Tensor*>& gin) {
        Tensor& dx = *gin[0];
        for (Index k = 0; k < c; ++k) {
          for (Index y = 0; y < h + 2 * padding; ++y) {
            const Index sy = clamp_index(y - padding, h);
            for (Index xx = 0; xx < w + 2 * padding; ++xx) {
              dx.at(k, sy, clamp_index(xx - padding, w)) += g.at(k, y, xx);
            }
          }
        }
      });
}

Var channel_affine(Var x, Var scale, Var shift) {
  const Tensor& in = x.value();
  if (in.rank() != 3) throw ContractViolation("channel_affine: input must be C x H x W");
  const Index c = in.dim(0), hw = in.dim(1) * in.dim(2);
  if (scale.value().shape() != Shape{c} || shift.value().shape() != Shape{c}) {
    throw ContractViolation("channel_affine: scale/shift must have length " + dims(c));
  }
  Tensor out(in.shape());
  out.matrix(c, hw) = (in.matrix(c, hw).array().colwise() * scale.value().data().array())
                          .colwise() + shift.value().data().array();
  const Tensor* src = &in;
  const Tensor* s = &scale.value();
  return x.tape->record(
      std::move(out), {x, scale, shift},
      [src, s, c, hw](const Tensor& g, const std::vector<Tensor*>& gin) {
        auto dy = g.matrix(c, hw);
        if (gin[0]) gin[0]->matrix(c, hw).array() += dy.array().colwise() * s->data().array();
        if (gin[1]) {
          gin[1]->data() += (dy.array() * src->matrix(c, hw).array()).rowwise().sum().matrix();
        }
        if (gin[2]) gin[2]->data() += dy.rowwise().sum();
      });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.value().shape(), a.value().data() + b.value().data());
  return a.tape->record(std::move(out), {a, b},
                        [](const Tensor& g, const std::vector<Tensor*>& gin) {
                          if (gin[0]) gin[0]->data() += g.data();
                          if (gin[1]) gin[1]->data() += g.data();
                        });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  const Tensor* x = &a.value();
  const Tensor* y = &b.value();
  Tensor out(x->shape(), x->data().cwiseProduct(y->data()));
  return a.tape->record(std::move(out), {a, b},
                        [x, y](const Tensor& g, const std::vector<Tensor*>& gin) {
                          if (gin[0]) gin[0]->data() += g.data().cwiseProduct(y->data());
                          if (gin[1]) gin[1]->data() += g.data().cwiseProduct(x->data());
                        });
}

Var scale(Var x, double factor) {
  Tensor out(x.value().shape(), x.value().data() * factor);
  return x.tape->record(std::move(out), {x},
                        [factor](const Tensor& g, const std::vector<Tensor*>& gin) {
                          gin[0]->data() += factor * g.data();
                        });
}

Var sum(Var x) {
  return x.tape->record(Tensor::scalar(x.value().data().sum()), {x},
                        [](const Tensor& g, const std::vector<Tensor*>& gin) {
                          gin[0]->data().array() += g.item();
                        });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return x.tape->record(Tensor::scalar(x.value().data().sum() / n), {x},
                        [n](const Tensor& g, const std::vector<Tensor*>& gin) {
                          gin[0]->data().array() += g.item() / n;
                        });
}

Var sigmoid(Var x) {
  Eigen::VectorXd y = x.value().data().unaryExpr(
      [](double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); });
  Tensor out(x.value().shape(), y);
  return x.tape->record(std::move(out), {x},
                        [y](const Tensor& g, const std::vector<Tensor*>& gin) {
                          gin[0]->data().array() +=
                              g.data().array() * y.array() * (1.0 - y.array());
                        });
}

}  // namespace gandetect
