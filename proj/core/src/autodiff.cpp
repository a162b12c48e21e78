#include "pdegcn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdegcn/errors.hpp"

namespace pdegcn::ad {

Tensor::Tensor(FeatureMatrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(FeatureMatrix(1, 1, value), requires_grad);
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    std::ostringstream msg;
    msg << "item() on a " << rows() << "x" << cols() << " tensor";
    throw ShapeError(msg.str());
  }
  return node_->value(0, 0);
}

const FeatureMatrix& Tensor::grad() const {
  if (!node_->has_grad) {
    if (!node_->grad.same_shape(node_->value)) {
      node_->grad = FeatureMatrix(node_->value.rows(), node_->value.cols());
    } else {
      node_->grad.fill(0.0);
    }
  }
  return node_->grad;
}

void Tensor::zero_grad() const {
  if (node_) node_->has_grad = false;
}

void Tensor::accumulate_grad(const FeatureMatrix& g) const { accumulate_grad_scaled(g, 1.0); }

void Tensor::accumulate_grad_scaled(const FeatureMatrix& g, double scale) const {
  if (!g.same_shape(node_->value)) {
    std::ostringstream msg;
    msg << "gradient of shape " << g.rows() << "x" << g.cols() << " for a " << rows() << "x" << cols() << " tensor";
    throw ShapeError(msg.str());
  }
  if (!node_->has_grad) {
    node_->grad = FeatureMatrix(g.rows(), g.cols());
    node_->has_grad = true;
  }
  auto dst = node_->grad.values();
  auto src = g.values();
  bool finite = true;
  for (std::size_t k = 0; k < dst.size(); ++k) {
    dst[k] += scale * src[k];
    finite = finite && std::isfinite(dst[k]);
  }
  if (!finite) require_finite(node_->grad, "accumulated gradient");
}

bool Tape::needs_record(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(std::function<void()> backward_fn) { records_.push_back(std::move(backward_fn)); }

void Tape::backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    std::ostringstream msg;
    msg << "backward() needs a 1x1 loss, got " << loss.rows() << "x" << loss.cols();
    throw ShapeError(msg.str());
  }
  require_finite(loss.value(), "loss");
  if (loss.requires_grad()) {
    Tensor seed = loss;
    seed.accumulate_grad(FeatureMatrix(1, 1, 1.0));
  }
  auto records = std::move(records_);
  records_.clear();
  // Dropping each record once it has run frees the intermediates it captured,
  // so peak memory falls as the sweep moves back through the layers.
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    (*it)();
    *it = nullptr;
  }
}

void require_finite(const FeatureMatrix& m, const char* where) {
  const auto v = m.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k])) {
      std::ostringstream msg;
      msg << "non-finite value " << v[k] << " in " << where << " at entry (" << k / std::max<std::size_t>(m.cols(), 1)
          << ", " << k % std::max<std::size_t>(m.cols(), 1) << ")";
      throw NumericalError(msg.str());
    }
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    std::ostringstream msg;
    msg << op << ": shapes " << a.rows() << "x" << a.cols() << " and " << b.rows() << "x" << b.cols() << " differ";
    throw ShapeError(msg.str());
  }
}

void require_scalar(const Tensor& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) {
    std::ostringstream msg;
    msg << op << ": expected a 1x1 tensor, got " << s.rows() << "x" << s.cols();
    throw ShapeError(msg.str());
  }
}

// Upstream gradient of an op output, checked before it is propagated.
const FeatureMatrix& upstream(const Tensor& out, const char* op) {
  const FeatureMatrix& g = out.grad();
  if (out.has_grad()) require_finite(g, op);
  return g;
}

template <typename F>
FeatureMatrix map_values(const FeatureMatrix& x, F f) {
  FeatureMatrix out(x.rows(), x.cols());
  auto src = x.values();
  auto dst = out.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = f(src[k]);
  return out;
}

}  // namespace

Tensor dense_linear(Tape& tape, const Tensor& x, const Tensor& k) {
  Tensor out(matmul(x.value(), k.value()));
  if (tape.needs_record({&x, &k})) {
    out.set_requires_grad(true);
    tape.record([x, k, out]() mutable {
      if (!out.has_grad()) return;
      const FeatureMatrix& g = upstream(out, "dense_linear");
      if (x.requires_grad()) x.accumulate_grad(matmul_bt(g, k.value()));
      if (k.requires_grad()) k.accumulate_grad(matmul_at(x.value(), g));
    });
  }
  return out;
}

Tensor dense_linear_transposed(Tape& tape, const Tensor& x, const Tensor& k) {
  Tensor out(matmul_bt(x.value(), k.value()));
  if (tape.needs_record({&x, &k})) {
    out.set_requires_grad(true);
    tape.record([x, k, out]() mutable {
      if (!out.has_grad()) return;
      const FeatureMatrix& g = upstream(out, "dense_linear_transposed");
      if (x.requires_grad()) x.accumulate_grad(matmul(g, k.value()));
      if (k.requires_grad()) k.accumulate_grad(matmul_at(g, x.value()));
    });
  }
  return out;
}

Tensor sparse_apply(Tape& tape, const SparseOperator& op, const Tensor& x) {
  Tensor out(op.apply(x.value()));
  if (tape.needs_record({&x})) {
    out.set_requires_grad(true);
    tape.record([&op, x, out]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad(op.apply_transpose(upstream(out, "sparse_apply")));
    });
  }
  return out;
}

Tensor sparse_apply_transpose(Tape& tape, const SparseOperator& op, const Tensor& q) {
  Tensor out(op.apply_transpose(q.value()));
  if (tape.needs_record({&q})) {
    out.set_requires_grad(true);
    tape.record([&op, q, out]() mutable {
      if (!out.has_grad()) return;
      q.accumulate_grad(op.apply(upstream(out, "sparse_apply_transpose")));
    });
  }
  return out;
}

namespace {

Tensor add_scaled(Tape& tape, const Tensor& a, const Tensor& b, double sb, const char* name) {
  require_same_shape(a, b, name);
  FeatureMatrix v = a.value();
  auto dst = v.values();
  auto src = b.value().values();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += sb * src[k];
  Tensor out(std::move(v));
  if (tape.needs_record({&a, &b})) {
    out.set_requires_grad(true);
    tape.record([a, b, out, sb, name]() mutable {
      if (!out.has_grad()) return;
      const FeatureMatrix& g = upstream(out, name);
      if (a.requires_grad()) a.accumulate_grad(g);
      if (b.requires_grad()) b.accumulate_grad_scaled(g, sb);
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return add_scaled(tape, a, b, 1.0, "add"); }

Tensor subtract(Tape& tape, const Tensor& a, const Tensor& b) { return add_scaled(tape, a, b, -1.0, "subtract"); }

Tensor axpy(Tape& tape, const Tensor& a, const Tensor& b, double s) { return add_scaled(tape, a, b, s, "axpy"); }

Tensor scale(Tape& tape, const Tensor& x, double s) { return affine(tape, x, s, 0.0); }

Tensor affine(Tape& tape, const Tensor& x, double a, double b) {
  Tensor out(map_values(x.value(), [a, b](double v) { return a * v + b; }));
  if (tape.needs_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out, a]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad_scaled(upstream(out, "affine"), a);
    });
  }
  return out;
}

Tensor scalar_multiply(Tape& tape, const Tensor& x, const Tensor& s) {
  require_scalar(s, "scalar_multiply");
  const double sv = s.item();
  Tensor out(map_values(x.value(), [sv](double v) { return sv * v; }));
  if (tape.needs_record({&x, &s})) {
    out.set_requires_grad(true);
    tape.record([x, s, out]() mutable {
      if (!out.has_grad()) return;
      const FeatureMatrix& g = upstream(out, "scalar_multiply");
      if (x.requires_grad()) x.accumulate_grad_scaled(g, s.item());
      if (s.requires_grad()) s.accumulate_grad(FeatureMatrix(1, 1, frobenius_dot(g, x.value())));
    });
  }
  return out;
}

Tensor reciprocal(Tape& tape, const Tensor& s) {
  require_scalar(s, "reciprocal");
  const double sv = s.item();
  if (sv == 0.0) throw NumericalError("reciprocal of zero");
  Tensor out = Tensor::scalar(1.0 / sv);
  if (tape.needs_record({&s})) {
    out.set_requires_grad(true);
    tape.record([s, out, sv]() mutable {
      if (!out.has_grad()) return;
      const double g = upstream(out, "reciprocal")(0, 0);
      s.accumulate_grad(FeatureMatrix(1, 1, -g / (sv * sv)));
    });
  }
  return out;
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> blocks) {
  if (blocks.empty()) throw ShapeError("concat_channels: no blocks");
  std::vector<FeatureMatrix> values;
  values.reserve(blocks.size());
  bool any = false;
  for (const auto& b : blocks) {
    values.push_back(b.value());
    any = any || b.requires_grad();
  }
  Tensor out(concat_columns(values));
  if (tape.recording() && any) {
    out.set_requires_grad(true);
    std::vector<Tensor> inputs(blocks.begin(), blocks.end());
    tape.record([inputs, out]() mutable {
      if (!out.has_grad()) return;
      const FeatureMatrix& g = upstream(out, "concat_channels");
      std::size_t offset = 0;
      for (auto& in : inputs) {
        const std::size_t c = in.cols();
        if (in.requires_grad()) {
          FeatureMatrix part(g.rows(), c);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t j = 0; j < c; ++j) part(r, j) = g(r, offset + j);
          }
          in.accumulate_grad(part);
        }
        offset += c;
      }
    });
  }
  return out;
}

namespace {

// tanh through expm1: within an ulp or two of std::tanh and about 1.5x faster,
// which matters because the activation dominates each PDE block.
double fast_tanh(double v) {
  const double t = std::expm1(-2.0 * std::fabs(v));
  return std::copysign(-t / (t + 2.0), v);
}

}  // namespace

Tensor tanh(Tape& tape, const Tensor& x) {
  Tensor out(map_values(x.value(), fast_tanh));
  if (tape.needs_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const FeatureMatrix& g = upstream(out, "tanh");
      FeatureMatrix d(g.rows(), g.cols());
      auto y = out.value().values();
      auto gv = g.values();
      auto dv = d.values();
      for (std::size_t k = 0; k < dv.size(); ++k) dv[k] = gv[k] * (1.0 - y[k] * y[k]);
      x.accumulate_grad(d);
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out(map_values(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }));
  if (tape.needs_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      const FeatureMatrix& g = upstream(out, "relu");
      FeatureMatrix d(g.rows(), g.cols());
      auto xv = x.value().values();
      auto gv = g.values();
      auto dv = d.values();
      for (std::size_t k = 0; k < dv.size(); ++k) dv[k] = xv[k] > 0.0 ? gv[k] : 0.0;
      x.accumulate_grad(d);
    });
  }
  return out;
}

Tensor edge_conv(Tape& tape, const SparseOperator& op, const Tensor& x, const Tensor& k, Nonlinearity s,
                 bool symmetric) {
  if (k.rows() != k.cols() || k.rows() != x.cols()) {
    std::ostringstream msg;
    msg << "edge_conv: kernel " << k.rows() << "x" << k.cols() << " does not fit " << x.cols() << " channels";
    throw ShapeError(msg.str());
  }
  FeatureMatrix act = matmul(op.apply(x.value()), k.value());
  for (double& v : act.values()) v = s == Nonlinearity::tanh ? fast_tanh(v) : std::max(v, 0.0);
  Tensor out(op.apply_transpose(symmetric ? matmul_bt(act, k.value()) : act));
  if (tape.needs_record({&x, &k})) {
    out.set_requires_grad(true);
    tape.record([&op, x, k, out, act = std::move(act), s, symmetric]() mutable {
      if (!out.has_grad()) return;
      FeatureMatrix d = op.apply(upstream(out, "edge_conv"));
      if (symmetric) {
        if (k.requires_grad()) k.accumulate_grad(matmul_at(d, act));
        d = matmul(d, k.value());
      }
      auto dv = d.values();
      auto av = act.values();
      for (std::size_t i = 0; i < dv.size(); ++i) {
        dv[i] *= s == Nonlinearity::tanh ? 1.0 - av[i] * av[i] : (av[i] > 0.0 ? 1.0 : 0.0);
      }
      if (k.requires_grad()) k.accumulate_grad(matmul_at(op.apply(x.value()), d));
      if (x.requires_grad()) x.accumulate_grad(op.apply_transpose(matmul_bt(d, k.value())));
    });
  }
  return out;
}

Tensor sigmoid_scalar(Tape& tape, const Tensor& s) {
  require_scalar(s, "sigmoid_scalar");
  const double v = s.item();
  const double y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  Tensor out = Tensor::scalar(y);
  if (tape.needs_record({&s})) {
    out.set_requires_grad(true);
    tape.record([s, out, y]() mutable {
      if (!out.has_grad()) return;
      const double g = upstream(out, "sigmoid_scalar")(0, 0);
      s.accumulate_grad(FeatureMatrix(1, 1, g * y * (1.0 - y)));
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "dropout probability " << p << " outside [0, 1)";
    throw UsageError(msg.str());
  }
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  FeatureMatrix mask(x.rows(), x.cols());
  for (double& m : mask.values()) m = rng.uniform() >= p ? keep_scale : 0.0;
  FeatureMatrix v = x.value();
  {
    auto dv = v.values();
    auto mv = mask.values();
    for (std::size_t k = 0; k < dv.size(); ++k) dv[k] *= mv[k];
  }
  Tensor out(std::move(v));
  if (tape.needs_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out, mask = std::move(mask)]() mutable {
      if (!out.has_grad()) return;
      FeatureMatrix d = upstream(out, "dropout");
      auto dv = d.values();
      auto mv = mask.values();
      for (std::size_t k = 0; k < dv.size(); ++k) dv[k] *= mv[k];
      x.accumulate_grad(d);
    });
  }
  return out;
}

Tensor input_dropout(const Tensor& x, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "dropout probability " << p << " outside [0, 1)";
    throw UsageError(msg.str());
  }
  if (x.requires_grad()) throw UsageError("input_dropout on a tensor that carries a gradient");
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  FeatureMatrix v = x.value();
  for (double& e : v.values()) {
    if (e != 0.0) e = rng.uniform() >= p ? e * keep_scale : 0.0;
  }
  return Tensor(std::move(v));
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels,
                             std::span<const std::size_t> rows) {
  if (rows.empty()) throw UsageError("softmax_cross_entropy: empty row set");
  const FeatureMatrix& z = logits.value();
  const std::size_t k = z.cols();
  if (labels.size() != z.rows()) {
    std::ostringstream msg;
    msg << "softmax_cross_entropy: " << labels.size() << " labels for " << z.rows() << " rows";
    throw ShapeError(msg.str());
  }
  FeatureMatrix probs(rows.size(), k);
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (r >= z.rows()) throw ShapeError("softmax_cross_entropy: row index out of range");
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      std::ostringstream msg;
      msg << "softmax_cross_entropy: label " << label << " at row " << r << " outside [0, " << k << ")";
      throw DataError(msg.str());
    }
    const auto zr = z.row(r);
    const std::size_t top = static_cast<std::size_t>(std::max_element(zr.begin(), zr.end()) - zr.begin());
    const double mx = zr[top];
    // log-sum-exp as log1p of the non-maximal terms keeps tiny losses exact.
    double others = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double e = c == top ? 1.0 : std::exp(zr[c] - mx);
      probs(i, c) = e;
      if (c != top) others += e;
    }
    const double denom = 1.0 + others;
    for (std::size_t c = 0; c < k; ++c) probs(i, c) /= denom;
    total += std::log1p(others) - (zr[static_cast<std::size_t>(label)] - mx);
  }
  const double n = static_cast<double>(rows.size());
  Tensor out = Tensor::scalar(total / n);
  if (tape.needs_record({&logits})) {
    out.set_requires_grad(true);
    std::vector<std::size_t> row_copy(rows.begin(), rows.end());
    std::vector<int> label_copy;
    label_copy.reserve(rows.size());
    for (std::size_t r : rows) label_copy.push_back(labels[r]);
    tape.record([logits, out, probs = std::move(probs), row_copy = std::move(row_copy),
                 label_copy = std::move(label_copy), n]() mutable {
      if (!out.has_grad()) return;
      const double g = upstream(out, "softmax_cross_entropy")(0, 0);
      FeatureMatrix d(logits.rows(), logits.cols());
      for (std::size_t i = 0; i < row_copy.size(); ++i) {
        auto dr = d.row(row_copy[i]);
        for (std::size_t c = 0; c < dr.size(); ++c) dr[c] += g * probs(i, c) / n;
        dr[static_cast<std::size_t>(label_copy[i])] -= g / n;
      }
      logits.accumulate_grad(d);
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  Tensor out = Tensor::scalar(s);
  if (tape.needs_record({&x})) {
    out.set_requires_grad(true);
    tape.record([x, out]() mutable {
      if (!out.has_grad()) return;
      x.accumulate_grad(FeatureMatrix(x.rows(), x.cols(), upstream(out, "sum")(0, 0)));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<AdamGroup> groups, AdamHyperParams hyper) : groups_(std::move(groups)), hyper_(hyper) {
  for (const auto& group : groups_) {
    if (!(group.lr >= 0.0) || !(group.weight_decay >= 0.0)) {
      throw UsageError("Adam group '" + group.name + "': learning rate and weight decay must be >= 0");
    }
    for (const auto& p : group.params) {
      m_.emplace_back(p.rows(), p.cols());
      v_.emplace_back(p.rows(), p.cols());
    }
  }
}

void Adam::update(std::size_t flat, Tensor& param, const FeatureMatrix& g, const AdamGroup& group, double bc1,
                  double bc2) {
  auto theta = param.mutable_value().values();
  auto m = m_[flat].values();
  auto v = v_[flat].values();
  auto gv = g.values();
  const double b1 = hyper_.beta1;
  const double b2 = hyper_.beta2;
  const double lr = group.lr;
  const double wd = group.weight_decay;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    m[k] = b1 * m[k] + (1.0 - b1) * gv[k];
    v[k] = b2 * v[k] + (1.0 - b2) * gv[k] * gv[k];
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    double delta = m_hat / (std::sqrt(v_hat) + hyper_.eps);
    if (wd > 0.0) delta += wd * theta[k];
    theta[k] -= lr * delta;
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  std::size_t flat = 0;
  for (auto& group : groups_) {
    for (auto& p : group.params) {
      if (p.requires_grad()) {
        const FeatureMatrix& g = p.grad();
        require_finite(g, ("gradient of group " + group.name).c_str());
        update(flat, p, g, group, bc1, bc2);
      }
      ++flat;
    }
  }
}

void Adam::step(std::span<const FeatureMatrix> grads) {
  if (grads.size() != m_.size()) {
    std::ostringstream msg;
    msg << "Adam::step: " << grads.size() << " gradients for " << m_.size() << " parameters";
    throw ShapeError(msg.str());
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  std::size_t flat = 0;
  for (auto& group : groups_) {
    for (auto& p : group.params) {
      if (!grads[flat].same_shape(p.value())) throw ShapeError("Adam::step: gradient shape mismatch");
      if (p.requires_grad()) update(flat, p, grads[flat], group, bc1, bc2);
      ++flat;
    }
  }
}

void Adam::zero_grad() {
  for (auto& group : groups_) {
    for (auto& p : group.params) p.zero_grad();
  }
}

void Adam::restore(std::uint64_t t, std::vector<FeatureMatrix> m, std::vector<FeatureMatrix> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("Adam::restore: buffer count mismatch");
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!m[k].same_shape(m_[k]) || !v[k].same_shape(v_[k])) throw ShapeError("Adam::restore: buffer shape mismatch");
  }
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw UsageError("grad_check: epsilon must be > 0");
  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    tape.backward(loss);
  }
  std::vector<FeatureMatrix> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  auto evaluate = [&]() {
    Tape tape(false);
    return loss_fn(tape).item();
  };

  GradCheckReport report;
  Rng rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    if (!p.requires_grad()) continue;
    const std::size_t count = p.value().size();
    std::vector<std::size_t> coords;
    if (options.max_coordinates_per_param == 0 || options.max_coordinates_per_param >= count) {
      coords.resize(count);
      for (std::size_t k = 0; k < count; ++k) coords[k] = k;
    } else {
      for (std::size_t k = 0; k < options.max_coordinates_per_param; ++k) coords.push_back(rng.below(count));
    }
    for (std::size_t idx : coords) {
      double& slot = p.mutable_value().values()[idx];
      const double saved = slot;
      slot = saved + options.epsilon;
      const double plus = evaluate();
      slot = saved - options.epsilon;
      const double minus = evaluate();
      slot = saved;
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = analytic[pi].values()[idx];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.coordinates_checked;
      if (rel > report.max_relative_error || report.coordinates_checked == 1) {
        report.max_relative_error = std::max(report.max_relative_error, rel);
        report.worst_param = pi;
        report.worst_index = idx;
      }
    }
  }
  return report;
}

}  // namespace pdegcn::ad
