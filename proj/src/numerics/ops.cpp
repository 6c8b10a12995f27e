#include "icar/numerics/ops.hpp"

#include "icar/error.hpp"

#include <cmath>
#include <string>

namespace icar {

namespace {

std::string dims(const Var& v) { return std::to_string(v.rows()) + "x" + std::to_string(v.cols()); }

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + dims(a) + " and " + dims(b) + " differ");
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

Matrix softmax_rows(const Matrix& x) {
  Matrix out = x.colwise() - x.rowwise().maxCoeff();
  out = out.array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return out;
}

// Backward of a row softmax given its output p.
Matrix softmax_rows_backward(const Matrix& p, const Matrix& g) {
  const Eigen::VectorXd dot = g.cwiseProduct(p).rowwise().sum();
  return p.cwiseProduct(g.colwise() - dot);
}

}  // namespace

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_derivative(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions of " + dims(a) + " and " + dims(b) + " disagree");
  }
  Matrix out = a.value() * b.value();
  return a.tape().record(OpKind::kMatmul, std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape("add", a, b);
  Matrix out = a.value() + b.value();
  return a.tape().record(OpKind::kAdd, std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape("sub", a, b);
  Matrix out = a.value() - b.value();
  return a.tape().record(OpKind::kAdd, std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, -g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape("hadamard", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape().record(OpKind::kMul, std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var scale(const Var& a, double s) {
  Matrix out = a.value() * s;
  return a.tape().record(OpKind::kScale, std::move(out), {a},
                         [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_bias(const Var& a, const Var& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_bias: bias " + dims(bias) + " does not broadcast over " + dims(a));
  }
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return a.tape().record(OpKind::kBias, std::move(out), {a, bias}, [a, bias](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
  });
}

Var transpose(const Var& a) {
  Matrix out = a.value().transpose();
  return a.tape().record(OpKind::kTranspose, std::move(out), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0 || rows * cols != a.value().size()) {
    throw DimensionError("reshape: cannot view " + dims(a) + " as " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  const Index r0 = a.rows();
  const Index c0 = a.cols();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return a.tape().record(OpKind::kReshape, std::move(out), {a}, [a, r0, c0](Tape& t, const Matrix& g) {
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

Var softmax(const Var& x, int axis) {
  if (axis != 0 && axis != 1) throw ContractError("softmax: axis must be 0 or 1");
  if (x.value().size() == 0) throw DimensionError("softmax: empty input");
  Matrix out = axis == 1 ? softmax_rows(x.value())
                         : Matrix(softmax_rows(x.value().transpose()).transpose());
  Matrix p = out;
  return x.tape().record(OpKind::kSoftmax, std::move(out), {x},
                         [x, p = std::move(p), axis](Tape& t, const Matrix& g) {
                           if (axis == 1) {
                             t.accumulate(x, softmax_rows_backward(p, g));
                           } else {
                             t.accumulate(x, softmax_rows_backward(p.transpose(), g.transpose()).transpose());
                           }
                         });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Index d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw DimensionError("layer_norm: gain " + dims(gain) + " / bias " + dims(bias) +
                         " do not match row width of " + dims(x));
  }
  if (eps <= 0) throw ContractError("layer_norm: eps must be positive");
  const Matrix& xv = x.value();
  Matrix xhat = xv.colwise() - xv.rowwise().mean();
  const Eigen::VectorXd inv_std =
      ((xhat.array().square().rowwise().sum() / static_cast<double>(d)) + eps).rsqrt().matrix();
  xhat.array().colwise() *= inv_std.array();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() +
               bias.value().row(0).array();
  return x.tape().record(
      OpKind::kLayerNorm, std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std](Tape& t, const Matrix& g) {
        if (t.needs_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
        if (!t.needs_grad(x)) return;
        const Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
        const Eigen::VectorXd m1 = dxhat.rowwise().mean();
        const Eigen::VectorXd m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
        Matrix dx = dxhat.colwise() - m1;
        dx.array() -= xhat.array().colwise() * m2.array();
        dx.array().colwise() *= inv_std.array();
        t.accumulate(x, dx);
      });
}

Var gelu(const Var& x) {
  Matrix out = x.value().unaryExpr([](double v) { return gelu_scalar(v); });
  return x.tape().record(OpKind::kGelu, std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct(x.value().unaryExpr([](double v) { return gelu_derivative(v); })));
  });
}

Var sigmoid(const Var& x) {
  Matrix out = x.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Matrix s = out;
  return x.tape().record(OpKind::kSigmoid, std::move(out), {x}, [x, s = std::move(s)](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix())));
  });
}

Var l2_normalize_rows(const Var& x) {
  const Eigen::VectorXd norms = x.value().rowwise().norm();
  if ((norms.array() == 0.0).any()) throw ContractError("l2_normalize_rows: zero row");
  Matrix out = x.value().array().colwise() / norms.array();
  Matrix y = out;
  return x.tape().record(OpKind::kNormalize, std::move(out), {x},
                         [x, y = std::move(y), norms](Tape& t, const Matrix& g) {
                           const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
                           Matrix dx = g - Matrix(y.array().colwise() * dot.array());
                           dx.array().colwise() /= norms.array();
                           t.accumulate(x, dx);
                         });
}

Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, int heads) {
  const Index rows = q.rows();
  return scaled_dot_attention(q, k, v, heads, std::span<const Index>(&rows, 1));
}

Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, int heads,
                         std::span<const Index> segments) {
  require_same_shape("attention q/k", q, k);
  require_same_shape("attention q/v", q, v);
  if (heads <= 0 || q.cols() % heads != 0) {
    throw DimensionError("attention: width " + std::to_string(q.cols()) + " not divisible into " +
                         std::to_string(heads) + " heads");
  }
  Index total = 0;
  for (Index len : segments) {
    if (len <= 0) throw DimensionError("attention: empty segment");
    total += len;
  }
  if (total != q.rows()) {
    throw DimensionError("attention: segments cover " + std::to_string(total) + " rows, inputs have " +
                         std::to_string(q.rows()));
  }
  const Index dh = q.cols() / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();

  std::vector<Matrix> probs;
  probs.reserve(segments.size() * heads);
  Matrix out(Q.rows(), Q.cols());
  Index r0 = 0;
  for (Index len : segments) {
    for (int h = 0; h < heads; ++h) {
      const Index c0 = h * dh;
      Matrix s = Q.block(r0, c0, len, dh) * K.block(r0, c0, len, dh).transpose() * inv_sqrt;
      Matrix p = softmax_rows(s);
      out.block(r0, c0, len, dh).noalias() = p * V.block(r0, c0, len, dh);
      probs.push_back(std::move(p));
    }
    r0 += len;
  }
  std::vector<Index> segs(segments.begin(), segments.end());
  return q.tape().record(
      OpKind::kAttention, std::move(out), {q, k, v},
      [q, k, v, heads, dh, inv_sqrt, segs = std::move(segs), probs = std::move(probs)](Tape& t,
                                                                                     const Matrix& g) {
        const Matrix& Q = q.value();
        const Matrix& K = k.value();
        const Matrix& V = v.value();
        Matrix dq = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dk = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dv = Matrix::Zero(Q.rows(), Q.cols());
        Index r0 = 0;
        std::size_t idx = 0;
        for (Index len : segs) {
          for (int h = 0; h < heads; ++h, ++idx) {
            const Index c0 = h * dh;
            const Matrix& p = probs[idx];
            const auto go = g.block(r0, c0, len, dh);
            dv.block(r0, c0, len, dh).noalias() = p.transpose() * go;
            const Matrix dp = go * V.block(r0, c0, len, dh).transpose();
            const Matrix ds = softmax_rows_backward(p, dp) * inv_sqrt;
            dq.block(r0, c0, len, dh).noalias() = ds * K.block(r0, c0, len, dh);
            dk.block(r0, c0, len, dh).noalias() = ds.transpose() * Q.block(r0, c0, len, dh);
          }
          r0 += len;
        }
        t.accumulate(q, dq);
        t.accumulate(k, dk);
        t.accumulate(v, dv);
      });
}

Var gather_rows(const Var& x, std::vector<Index> index) {
  Matrix out(static_cast<Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(index[i]) + " outside " + dims(x));
    }
    out.row(static_cast<Index>(i)) = x.value().row(index[i]);
  }
  return x.tape().record(OpKind::kGather, std::move(out), {x},
                         [x, index = std::move(index)](Tape& t, const Matrix& g) {
                           Matrix dx = Matrix::Zero(x.rows(), x.cols());
                           for (std::size_t i = 0; i < index.size(); ++i) {
                             dx.row(index[i]) += g.row(static_cast<Index>(i));
                           }
                           t.accumulate(x, dx);
                         });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != parts.front().cols()) {
      throw DimensionError("concat_rows: widths " + dims(parts.front()) + " and " + dims(p) + " differ");
    }
    rows += p.rows();
  }
  Matrix out(rows, parts.front().cols());
  Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts.front().tape().record(OpKind::kConcat, std::move(out), parts, [parts](Tape& t, const Matrix& g) {
    Index r = 0;
    for (const Var& p : parts) {
      t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var group_mean(const Var& x, Index group) {
  if (group <= 0 || x.rows() % group != 0) {
    throw DimensionError("group_mean: " + dims(x) + " rows not divisible by " + std::to_string(group));
  }
  const Index n = x.rows() / group;
  Matrix out(n, x.cols());
  for (Index i = 0; i < n; ++i) out.row(i) = x.value().middleRows(i * group, group).colwise().mean();
  return x.tape().record(OpKind::kReduce, std::move(out), {x}, [x, group, n](Tape& t, const Matrix& g) {
    Matrix dx(x.rows(), x.cols());
    for (Index i = 0; i < n; ++i) {
      dx.middleRows(i * group, group).rowwise() = g.row(i) / static_cast<double>(group);
    }
    t.accumulate(x, dx);
  });
}

Var sum(const Var& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape().record(OpKind::kReduce, std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  Matrix out(1, 1);
  out(0, 0) = x.value().sum() / n;
  return x.tape().record(OpKind::kReduce, std::move(out), {x}, [x, n](Tape& t, const Matrix& g) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  if (static_cast<Index>(targets.size()) != logits.rows() || logits.rows() == 0) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         dims(logits));
  }
  const Matrix& z = logits.value();
  const Eigen::VectorXd zmax = z.rowwise().maxCoeff();
  const Eigen::VectorXd lse =
      ((z.colwise() - zmax).array().exp().rowwise().sum().log()).matrix() + zmax;
  double total = 0.0;
  for (Index i = 0; i < z.rows(); ++i) {
    const int c = targets[i];
    if (c < 0 || c >= z.cols()) throw ContractError("cross_entropy: target class out of range");
    total += lse[i] - z(i, c);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(z.rows());
  std::vector<int> tgt(targets.begin(), targets.end());
  return logits.tape().record(OpKind::kLoss, std::move(out), {logits},
                              [logits, lse, tgt = std::move(tgt)](Tape& t, const Matrix& g) {
                                const Matrix& z = logits.value();
                                Matrix d = (z.colwise() - lse).array().exp();
                                for (Index i = 0; i < z.rows(); ++i) d(i, tgt[i]) -= 1.0;
                                t.accumulate(logits, d * (g(0, 0) / static_cast<double>(z.rows())));
                              });
}

Var mse_loss(const Var& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("mse_loss: prediction " + dims(pred) + " vs target " +
                         std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
  }
  const Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return pred.tape().record(OpKind::kLoss, std::move(out), {pred}, [pred, diff, n](Tape& t, const Matrix& g) {
    t.accumulate(pred, diff * (2.0 * g(0, 0) / n));
  });
}

Var conv3x3(const Var& x, const Var& weight, Index batch, Index height, Index width) {
  const Index cin = x.cols();
  if (x.rows() != batch * height * width) {
    throw DimensionError("conv3x3: input " + dims(x) + " is not " + std::to_string(batch) + " images of " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  if (weight.rows() != 9 * cin) {
    throw DimensionError("conv3x3: weight " + dims(weight) + " does not match " + std::to_string(cin) +
                         " input channels");
  }
  const Index pixels = x.rows();
  Matrix cols = Matrix::Zero(pixels, 9 * cin);
  const Matrix& xv = x.value();
  for (Index b = 0; b < batch; ++b) {
    for (Index y = 0; y < height; ++y) {
      for (Index xx = 0; xx < width; ++xx) {
        const Index row = (b * height + y) * width + xx;
        for (int ky = 0; ky < 3; ++ky) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const Index sx = xx + kx - 1;
            if (sx < 0 || sx >= width) continue;
            cols.block(row, (ky * 3 + kx) * cin, 1, cin) = xv.row((b * height + sy) * width + sx);
          }
        }
      }
    }
  }
  Matrix out = cols * weight.value();
  return x.tape().record(
      OpKind::kConv, std::move(out), {x, weight},
      [x, weight, cols = std::move(cols), batch, height, width, cin](Tape& t, const Matrix& g) {
        if (t.needs_grad(weight)) t.accumulate(weight, cols.transpose() * g);
        if (!t.needs_grad(x)) return;
        const Matrix dcols = g * weight.value().transpose();
        Matrix dx = Matrix::Zero(x.rows(), cin);
        for (Index b = 0; b < batch; ++b) {
          for (Index y = 0; y < height; ++y) {
            for (Index xx = 0; xx < width; ++xx) {
              const Index row = (b * height + y) * width + xx;
              for (int ky = 0; ky < 3; ++ky) {
                const Index sy = y + ky - 1;
                if (sy < 0 || sy >= height) continue;
                for (int kx = 0; kx < 3; ++kx) {
                  const Index sx = xx + kx - 1;
                  if (sx < 0 || sx >= width) continue;
                  dx.row((b * height + sy) * width + sx) += dcols.block(row, (ky * 3 + kx) * cin, 1, cin);
                }
              }
            }
          }
        }
        t.accumulate(x, dx);
      });
}

Var avg_pool2x2(const Var& x, Index batch, Index height, Index width) {
  if (height % 2 != 0 || width % 2 != 0 || x.rows() != batch * height * width) {
    throw DimensionError("avg_pool2x2: input " + dims(x) + " is not " + std::to_string(batch) +
                         " images of even size " + std::to_string(height) + "x" + std::to_string(width));
  }
  const Index oh = height / 2;
  const Index ow = width / 2;
  const Matrix& xv = x.value();
  Matrix out(batch * oh * ow, x.cols());
  for (Index b = 0; b < batch; ++b) {
    for (Index y = 0; y < oh; ++y) {
      for (Index xx = 0; xx < ow; ++xx) {
        const Index src = (b * height + 2 * y) * width + 2 * xx;
        out.row((b * oh + y) * ow + xx) =
            0.25 * (xv.row(src) + xv.row(src + 1) + xv.row(src + width) + xv.row(src + width + 1));
      }
    }
  }
  return x.tape().record(OpKind::kPool, std::move(out), {x}, [x, batch, height, width, oh, ow](Tape& t, const Matrix& g) {
    Matrix dx(x.rows(), x.cols());
    for (Index b = 0; b < batch; ++b) {
      for (Index y = 0; y < oh; ++y) {
        for (Index xx = 0; xx < ow; ++xx) {
          const Index src = (b * height + 2 * y) * width + 2 * xx;
          const RowVector gr = 0.25 * g.row((b * oh + y) * ow + xx);
          dx.row(src) = gr;
          dx.row(src + 1) = gr;
          dx.row(src + width) = gr;
          dx.row(src + width + 1) = gr;
        }
      }
    }
    t.accumulate(x, dx);
  });
}

}  // namespace icar
