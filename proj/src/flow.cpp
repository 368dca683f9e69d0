#include "qphase/flow.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qphase/errors.hpp"

namespace qphase {

Prior Prior::standard_normal(int dim) {
  Prior p;
  p.kind = PriorKind::StandardNormal;
  p.mean = Vec::Zero(dim);
  p.var = Vec::Ones(dim);
  return p;
}

Prior Prior::diagonal_gaussian(const Vec& mean, const Vec& var) {
  if (mean.size() != var.size())
    throw ConfigError("prior mean and var must have equal length");
  if ((var.array() <= 0).any()) throw ConfigError("prior variances must be positive");
  Prior p;
  p.kind = PriorKind::DiagonalGaussian;
  p.mean = mean;
  p.var = var;
  return p;
}

void Prior::log_density(const Mat& Z, Vec& out) const {
  const double c = -0.5 * (var.array() * 2.0 * M_PI).log().sum();
  out = Vec::Constant(Z.rows(), c);
  for (int j = 0; j < Z.cols(); ++j)
    out.array() -= 0.5 * (Z.col(j).array() - mean[j]).square() / var[j];
}

void Prior::sample(int n, RngStream& rng, Mat& out) const {
  const int d = dim();
  out.resize(n, d);
  Vec sd = var.array().sqrt();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) out(i, j) = mean[j] + sd[j] * rng.normal();
}

FlowModel::FlowModel(const FlowConfig& cfg) : cfg_(cfg) {
  if (cfg_.dim < 2 || cfg_.dim % 2 != 0)
    throw ConfigError("flow dim must be even and >= 2");
  if (cfg_.n_layers < 1) throw ConfigError("flow needs at least one layer");
  if (cfg_.hidden < 1) throw ConfigError("flow hidden width must be positive");
  if (cfg_.s_cap <= 0) throw ConfigError("flow scale cap must be positive");
  if (cfg_.prior.dim() != cfg_.dim)
    throw ConfigError("prior dimension does not match flow dimension");
  if ((cfg_.prior.var.array() <= 0).any())
    throw ConfigError("prior variances must be positive");
  const int h = cfg_.hidden, hf = cfg_.dim / 2;
  layer_np_ = h * hf + h + h * h + h + 2 * hf * h + 2 * hf;
  theta_ = Vec::Zero(static_cast<long>(layer_np_) * cfg_.n_layers);
}

void FlowModel::init_params(RngStream& rng) {
  init_seed_ = rng.seed();
  const int h = cfg_.hidden, hf = half();
  theta_.setZero();
  for (int l = 0; l < cfg_.n_layers; ++l) {
    long off = static_cast<long>(l) * layer_np_;
    // W1, b1, W2, b2 random; final layer (W3, b3) stays zero
    long n_inner = h * hf + h + h * h + h;
    for (long k = 0; k < n_inner; ++k) theta_[off + k] = rng.uniform(-0.05, 0.05);
  }
}

FlowModel::LayerView FlowModel::layer(int l) const {
  const int h = cfg_.hidden, hf = half();
  const double* p = theta_.data() + static_cast<long>(l) * layer_np_;
  const double* w1 = p;
  const double* b1 = w1 + h * hf;
  const double* w2 = b1 + h;
  const double* b2 = w2 + h * h;
  const double* w3 = b2 + h;
  const double* b3 = w3 + 2 * hf * h;
  return LayerView{Eigen::Map<const Mat>(w1, h, hf), Eigen::Map<const Mat>(w2, h, h),
                   Eigen::Map<const Mat>(w3, 2 * hf, h), Eigen::Map<const Vec>(b1, h),
                   Eigen::Map<const Vec>(b2, h), Eigen::Map<const Vec>(b3, 2 * hf)};
}

void FlowModel::mask_of(int l, int& m0, int& w0) const {
  if (l % 2 == 0) {
    m0 = 0;
    w0 = half();
  } else {
    m0 = half();
    w0 = 0;
  }
}

void FlowModel::check_points(const Mat& X) const {
  if (X.cols() != cfg_.dim) throw DomainError("point batch has wrong dimension");
  if (!X.allFinite()) throw DomainError("non-finite coordinates in point batch");
}

namespace {
// conditioner forward for one layer; returns tanh(s_raw/s_cap), s and t
void conditioner(const FlowModel::LayerView& lv, const Mat& U, double s_cap, Mat& H1,
                 Mat& H2, Mat& ThS, Mat& S, Mat& T) {
  H1 = ((U * lv.W1.transpose()).rowwise() + lv.b1.transpose()).array().tanh();
  H2 = ((H1 * lv.W2.transpose()).rowwise() + lv.b2.transpose()).array().tanh();
  Mat O = (H2 * lv.W3.transpose()).rowwise() + lv.b3.transpose();
  const int hf = static_cast<int>(O.cols()) / 2;
  ThS = (O.leftCols(hf) / s_cap).array().tanh();
  S = s_cap * ThS;
  T = O.rightCols(hf);
}
}  // namespace

void FlowModel::forward(const Mat& Z, Mat& X, Vec& logdet) const {
  check_points(Z);
  const int hf = half();
  X = Z;
  logdet = Vec::Zero(Z.rows());
  Mat H1, H2, ThS, S, T;
  for (int l = 0; l < cfg_.n_layers; ++l) {
    int m0, w0;
    mask_of(l, m0, w0);
    conditioner(layer(l), X.middleCols(m0, hf), cfg_.s_cap, H1, H2, ThS, S, T);
    X.middleCols(w0, hf) =
        (X.middleCols(w0, hf).array() * S.array().exp()).matrix() + T;
    logdet += S.rowwise().sum();
  }
}

void FlowModel::inverse(const Mat& X, Mat& Z, Vec& logdet) const {
  check_points(X);
  const int hf = half();
  Z = X;
  logdet = Vec::Zero(X.rows());
  Mat H1, H2, ThS, S, T;
  for (int l = cfg_.n_layers - 1; l >= 0; --l) {
    int m0, w0;
    mask_of(l, m0, w0);
    conditioner(layer(l), Z.middleCols(m0, hf), cfg_.s_cap, H1, H2, ThS, S, T);
    Z.middleCols(w0, hf) =
        ((Z.middleCols(w0, hf) - T).array() * (-S).array().exp()).matrix();
    logdet -= S.rowwise().sum();
  }
}

void FlowModel::inverse_with_cache(const Mat& X, InverseCache& c) const {
  check_points(X);
  const int hf = half(), L = cfg_.n_layers;
  c.U.resize(L);
  c.H1.resize(L);
  c.H2.resize(L);
  c.ThS.resize(L);
  c.E.resize(L);
  c.Zw.resize(L);
  c.Z = X;
  Vec logdet = Vec::Zero(X.rows());
  Mat S, T;
  for (int l = L - 1; l >= 0; --l) {
    int m0, w0;
    mask_of(l, m0, w0);
    c.U[l] = c.Z.middleCols(m0, hf);
    conditioner(layer(l), c.U[l], cfg_.s_cap, c.H1[l], c.H2[l], c.ThS[l], S, T);
    c.E[l] = (-S).array().exp();
    c.Zw[l] = ((c.Z.middleCols(w0, hf) - T).array() * c.E[l].array()).matrix();
    c.Z.middleCols(w0, hf) = c.Zw[l];
    logdet -= S.rowwise().sum();
  }
  cfg_.prior.log_density(c.Z, c.log_q);
  c.log_q += logdet;
}

void FlowModel::log_density(const Mat& X, Vec& out) const {
  Mat Z;
  Vec logdet;
  inverse(X, Z, logdet);
  cfg_.prior.log_density(Z, out);
  out += logdet;
}

double FlowModel::log_density_one(const Vec& x) const {
  Mat X = x.transpose();
  Vec out;
  log_density(X, out);
  return out[0];
}

void FlowModel::sample(int n, RngStream& rng, Mat& points, Vec& log_q) const {
  Mat Z;
  cfg_.prior.sample(n, rng, Z);
  Vec logdet;
  forward(Z, points, logdet);
  cfg_.prior.log_density(Z, log_q);
  log_q -= logdet;
}

// Backprop through the inverse pass. The objective is
//   sum_n w_n [log p_prior(z_n) - sum_layers sum_i s_i]
// and layers are unwound in the same order the chain rule visits them.
void FlowModel::weighted_param_grad(const InverseCache& c, const Vec& w, Vec& grad) const {
  const int hf = half(), h = cfg_.hidden, L = cfg_.n_layers;
  const long N = c.Z.rows();
  if (w.size() != N) throw DomainError("weight vector length mismatch");
  grad = Vec::Zero(theta_.size());

  Mat A(N, cfg_.dim);
  for (int j = 0; j < cfg_.dim; ++j)
    A.col(j) = (-(c.Z.col(j).array() - cfg_.prior.mean[j]) / cfg_.prior.var[j]) *
               w.array();

  Mat Sb(N, hf), Ob(N, 2 * hf), Pb2, Pb1;
  for (int l = 0; l < L; ++l) {
    int m0, w0;
    mask_of(l, m0, w0);
    LayerView lv = layer(l);
    auto Aw = A.middleCols(w0, hf);
    for (int i = 0; i < hf; ++i) {
      Ob.col(i) = (-Aw.col(i).array() * c.Zw[l].col(i).array() - w.array()) *
                  (1.0 - c.ThS[l].col(i).array().square());
      Ob.col(hf + i) = -Aw.col(i).array() * c.E[l].col(i).array();
    }
    long off = static_cast<long>(l) * layer_np_;
    auto gW1 = Eigen::Map<Mat>(grad.data() + off, h, hf);
    auto gb1 = Eigen::Map<Vec>(grad.data() + off + h * hf, h);
    auto gW2 = Eigen::Map<Mat>(grad.data() + off + h * hf + h, h, h);
    auto gb2 = Eigen::Map<Vec>(grad.data() + off + h * hf + h + h * h, h);
    auto gW3 = Eigen::Map<Mat>(grad.data() + off + h * hf + 2 * h + h * h, 2 * hf, h);
    auto gb3 = Eigen::Map<Vec>(grad.data() + off + h * hf + 2 * h + h * h + 2 * hf * h,
                               2 * hf);
    gW3 += Ob.transpose() * c.H2[l];
    gb3 += Ob.colwise().sum();
    Pb2 = (Ob * lv.W3).array() * (1.0 - c.H2[l].array().square());
    gW2 += Pb2.transpose() * c.H1[l];
    gb2 += Pb2.colwise().sum();
    Pb1 = (Pb2 * lv.W2).array() * (1.0 - c.H1[l].array().square());
    gW1 += Pb1.transpose() * c.U[l];
    gb1 += Pb1.colwise().sum();
    // adjoint of this layer's input
    A.middleCols(w0, hf) = Aw.array() * c.E[l].array();
    A.middleCols(m0, hf) += Pb1 * lv.W1;
  }
}

void FlowModel::scores(const InverseCache& c, Mat& out) const {
  const int hf = half(), h = cfg_.hidden, L = cfg_.n_layers;
  const long N = c.Z.rows();
  out = Mat::Zero(N, theta_.size());

  Mat A(N, cfg_.dim);
  for (int j = 0; j < cfg_.dim; ++j)
    A.col(j) = -(c.Z.col(j).array() - cfg_.prior.mean[j]) / cfg_.prior.var[j];

  Mat Ob(N, 2 * hf), Pb2, Pb1;
  for (int l = 0; l < L; ++l) {
    int m0, w0;
    mask_of(l, m0, w0);
    LayerView lv = layer(l);
    auto Aw = A.middleCols(w0, hf);
    for (int i = 0; i < hf; ++i) {
      Ob.col(i) = (-Aw.col(i).array() * c.Zw[l].col(i).array() - 1.0) *
                  (1.0 - c.ThS[l].col(i).array().square());
      Ob.col(hf + i) = -Aw.col(i).array() * c.E[l].col(i).array();
    }
    long off = static_cast<long>(l) * layer_np_;
    long oW1 = off, ob1 = off + h * hf, oW2 = ob1 + h, ob2 = oW2 + h * h;
    long oW3 = ob2 + h, ob3 = oW3 + 2 * hf * h;
    Pb2 = (Ob * lv.W3).array() * (1.0 - c.H2[l].array().square());
    Pb1 = (Pb2 * lv.W2).array() * (1.0 - c.H1[l].array().square());
    for (int cc = 0; cc < h; ++cc) {
      for (int r = 0; r < 2 * hf; ++r)
        out.col(oW3 + cc * 2 * hf + r) = Ob.col(r).array() * c.H2[l].col(cc).array();
      for (int r = 0; r < h; ++r)
        out.col(oW2 + cc * h + r) = Pb2.col(r).array() * c.H1[l].col(cc).array();
    }
    for (int cc = 0; cc < hf; ++cc)
      for (int r = 0; r < h; ++r)
        out.col(oW1 + cc * h + r) = Pb1.col(r).array() * c.U[l].col(cc).array();
    for (int r = 0; r < 2 * hf; ++r) out.col(ob3 + r) = Ob.col(r);
    for (int r = 0; r < h; ++r) out.col(ob2 + r) = Pb2.col(r);
    for (int r = 0; r < h; ++r) out.col(ob1 + r) = Pb1.col(r);
    A.middleCols(w0, hf) = Aw.array() * c.E[l].array();
    A.middleCols(m0, hf) += Pb1 * lv.W1;
  }
}

void FlowModel::param_grad_log_density(const Mat& X, Mat& scores_out) const {
  InverseCache c;
  inverse_with_cache(X, c);
  scores(c, scores_out);
}

void FlowModel::input_derivatives(const Vec& x, double& log_q, Vec& grad, Mat& hess) const {
  DerivEval ev(*this, DerivEval::HessMode::Full);
  grad.resize(cfg_.dim);
  hess.resize(cfg_.dim, cfg_.dim);
  std::vector<double> h(static_cast<size_t>(cfg_.dim) * cfg_.dim);
  log_q = ev.eval(x.data(), grad.data(), h.data());
  for (int i = 0; i < cfg_.dim; ++i)
    for (int j = 0; j < cfg_.dim; ++j) hess(i, j) = h[static_cast<size_t>(i) * cfg_.dim + j];
}

// ---------------------------------------------------------------------------
// DerivEval

DerivEval::DerivEval(const FlowModel& m, HessMode mode) : m_(m), mode_(mode) {
  d_ = m.dim();
  hd_ = mode == HessMode::Full ? d_ * d_ : (mode == HessMode::Diag ? d_ : 0);
  width_ = std::max(m.hidden(), 2 * m.half());
  pv_.resize(d_);
  pg_.resize(static_cast<size_t>(d_) * d_);
  ph_.resize(static_cast<size_t>(d_) * std::max(hd_, 1));
  av_.resize(width_);
  ag_.resize(static_cast<size_t>(width_) * d_);
  ah_.resize(static_cast<size_t>(width_) * std::max(hd_, 1));
  bv_.resize(width_);
  bg_.resize(static_cast<size_t>(width_) * d_);
  bh_.resize(static_cast<size_t>(width_) * std::max(hd_, 1));
  accg_.resize(d_);
  acch_.resize(std::max(hd_, 1));
  eg_.resize(d_);
  eh_.resize(std::max(hd_, 1));
  rg_.resize(d_);
  rh_.resize(std::max(hd_, 1));
}

void DerivEval::linear_stage(const Eigen::Map<const Mat>& W,
                             const Eigen::Map<const Vec>& b, const double* sv,
                             const double* sg, const double* sh, int nin, double* dv,
                             double* dg, double* dh, int nout) {
  for (int j = 0; j < nout; ++j) {
    dv[j] = b[j];
    double* g = dg + static_cast<size_t>(j) * d_;
    std::memset(g, 0, sizeof(double) * d_);
    double* h = dh + static_cast<size_t>(j) * hd_;
    if (hd_) std::memset(h, 0, sizeof(double) * hd_);
    for (int k = 0; k < nin; ++k) {
      const double w = W(j, k);
      if (w == 0.0) continue;
      dv[j] += w * sv[k];
      const double* gs = sg + static_cast<size_t>(k) * d_;
      for (int t = 0; t < d_; ++t) g[t] += w * gs[t];
      if (hd_) {
        const double* hs = sh + static_cast<size_t>(k) * hd_;
        for (int t = 0; t < hd_; ++t) h[t] += w * hs[t];
      }
    }
  }
}

void DerivEval::tanh_stage(double* v, double* g, double* h, int n) {
  for (int j = 0; j < n; ++j) {
    const double tv = std::tanh(v[j]);
    const double d1 = 1.0 - tv * tv;
    const double d2 = -2.0 * tv * d1;
    double* gj = g + static_cast<size_t>(j) * d_;
    double* hj = h + static_cast<size_t>(j) * hd_;
    if (mode_ == HessMode::Full) {
      for (int u = 0; u < d_; ++u)
        for (int t = 0; t < d_; ++t) hj[u * d_ + t] = d2 * gj[u] * gj[t] + d1 * hj[u * d_ + t];
    } else if (mode_ == HessMode::Diag) {
      for (int u = 0; u < d_; ++u) hj[u] = d2 * gj[u] * gj[u] + d1 * hj[u];
    }
    for (int u = 0; u < d_; ++u) gj[u] *= d1;
    v[j] = tv;
  }
}

double DerivEval::eval(const double* x, double* grad, double* hess) {
  const int d = d_, hd = hd_, hf = m_.half(), h = m_.hidden();
  const double s_cap = m_.config().s_cap;
  for (int c = 0; c < d; ++c) {
    if (!std::isfinite(x[c])) throw DomainError("non-finite point in derivative eval");
    pv_[c] = x[c];
  }
  std::fill(pg_.begin(), pg_.end(), 0.0);
  for (int c = 0; c < d; ++c) pg_[static_cast<size_t>(c) * d + c] = 1.0;
  std::fill(ph_.begin(), ph_.end(), 0.0);
  accv_ = 0.0;
  std::fill(accg_.begin(), accg_.end(), 0.0);
  std::fill(acch_.begin(), acch_.end(), 0.0);

  double* eg = eg_.data();
  double* eh = eh_.data();
  double* rg = rg_.data();
  double* rh = rh_.data();

  for (int l = m_.n_layers() - 1; l >= 0; --l) {
    int m0, w0;
    m_.mask_of(l, m0, w0);
    FlowModel::LayerView lv = m_.layer(l);
    const double* mv = pv_.data() + m0;
    const double* mg = pg_.data() + static_cast<size_t>(m0) * d;
    const double* mh = ph_.data() + static_cast<size_t>(m0) * std::max(hd, 1);
    linear_stage(lv.W1, lv.b1, mv, mg, mh, hf, av_.data(), ag_.data(), ah_.data(), h);
    tanh_stage(av_.data(), ag_.data(), ah_.data(), h);
    linear_stage(lv.W2, lv.b2, av_.data(), ag_.data(), ah_.data(), h, bv_.data(),
                 bg_.data(), bh_.data(), h);
    tanh_stage(bv_.data(), bg_.data(), bh_.data(), h);
    linear_stage(lv.W3, lv.b3, bv_.data(), bg_.data(), bh_.data(), h, av_.data(),
                 ag_.data(), ah_.data(), 2 * hf);

    for (int i = 0; i < hf; ++i) {
      // s = s_cap * tanh(s_raw / s_cap), in place on jet i
      double* sv = av_.data() + i;
      double* sg = ag_.data() + static_cast<size_t>(i) * d;
      double* sh = ah_.data() + static_cast<size_t>(i) * std::max(hd, 1);
      {
        const double th = std::tanh(*sv / s_cap);
        const double d1 = 1.0 - th * th;
        const double d2 = -2.0 * th * d1 / s_cap;
        if (mode_ == HessMode::Full) {
          for (int u = 0; u < d; ++u)
            for (int t = 0; t < d; ++t)
              sh[u * d + t] = d2 * sg[u] * sg[t] + d1 * sh[u * d + t];
        } else if (mode_ == HessMode::Diag) {
          for (int u = 0; u < d; ++u) sh[u] = d2 * sg[u] * sg[u] + d1 * sh[u];
        }
        for (int u = 0; u < d; ++u) sg[u] *= d1;
        *sv = s_cap * th;
      }
      // log-det accumulator takes -s
      accv_ -= *sv;
      for (int u = 0; u < d; ++u) accg_[u] -= sg[u];
      for (int t = 0; t < hd; ++t) acch_[t] -= sh[t];
      // e = exp(-s)
      const double ev = std::exp(-*sv);
      for (int u = 0; u < d; ++u) eg[u] = -ev * sg[u];
      if (mode_ == HessMode::Full) {
        for (int u = 0; u < d; ++u)
          for (int t = 0; t < d; ++t) eh[u * d + t] = ev * (sg[u] * sg[t] - sh[u * d + t]);
      } else if (mode_ == HessMode::Diag) {
        for (int u = 0; u < d; ++u) eh[u] = ev * (sg[u] * sg[u] - sh[u]);
      }
      // r = y_w - t
      const double* tv = av_.data() + hf + i;
      const double* tg = ag_.data() + static_cast<size_t>(hf + i) * d;
      const double* th2 = ah_.data() + static_cast<size_t>(hf + i) * std::max(hd, 1);
      double* yv = pv_.data() + w0 + i;
      double* yg = pg_.data() + static_cast<size_t>(w0 + i) * d;
      double* yh = ph_.data() + static_cast<size_t>(w0 + i) * std::max(hd, 1);
      const double rv = *yv - *tv;
      for (int u = 0; u < d; ++u) rg[u] = yg[u] - tg[u];
      for (int t = 0; t < hd; ++t) rh[t] = yh[t] - th2[t];
      // z_w = r * e
      if (mode_ == HessMode::Full) {
        for (int u = 0; u < d; ++u)
          for (int t = 0; t < d; ++t)
            yh[u * d + t] = rv * eh[u * d + t] + ev * rh[u * d + t] + rg[u] * eg[t] + eg[u] * rg[t];
      } else if (mode_ == HessMode::Diag) {
        for (int u = 0; u < d; ++u) yh[u] = rv * eh[u] + ev * rh[u] + 2.0 * rg[u] * eg[u];
      }
      for (int u = 0; u < d; ++u) yg[u] = rv * eg[u] + ev * rg[u];
      *yv = rv * ev;
    }
  }

  // prior term
  const Prior& pr = m_.prior();
  for (int c = 0; c < d; ++c) {
    const double iv = 1.0 / pr.var[c];
    const double a = pv_[c] - pr.mean[c];
    accv_ += -0.5 * a * a * iv - 0.5 * std::log(2.0 * M_PI * pr.var[c]);
    const double* gc = pg_.data() + static_cast<size_t>(c) * d;
    const double* hc = ph_.data() + static_cast<size_t>(c) * std::max(hd, 1);
    for (int u = 0; u < d; ++u) accg_[u] -= a * iv * gc[u];
    if (mode_ == HessMode::Full) {
      for (int u = 0; u < d; ++u)
        for (int t = 0; t < d; ++t) acch_[u * d + t] -= iv * (gc[u] * gc[t] + a * hc[u * d + t]);
    } else if (mode_ == HessMode::Diag) {
      for (int u = 0; u < d; ++u) acch_[u] -= iv * (gc[u] * gc[u] + a * hc[u]);
    }
  }

  if (grad) std::memcpy(grad, accg_.data(), sizeof(double) * d);
  if (hess && hd) std::memcpy(hess, acch_.data(), sizeof(double) * hd);
  return accv_;
}

// ---------------------------------------------------------------------------
// checkpoint io: text header, then raw little-endian float64 parameters

void FlowModel::save(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  std::fprintf(f, "flowmodel 1\n");
  std::fprintf(f, "dim %d\n", cfg_.dim);
  std::fprintf(f, "layers %d\n", cfg_.n_layers);
  std::fprintf(f, "hidden %d\n", cfg_.hidden);
  std::fprintf(f, "s_cap %.17g\n", cfg_.s_cap);
  std::fprintf(f, "prior %s\n", cfg_.prior.kind == PriorKind::StandardNormal
                                    ? "standard-normal"
                                    : "diagonal-gaussian");
  std::fprintf(f, "mean");
  for (int i = 0; i < cfg_.dim; ++i) std::fprintf(f, " %.17g", cfg_.prior.mean[i]);
  std::fprintf(f, "\nvar");
  for (int i = 0; i < cfg_.dim; ++i) std::fprintf(f, " %.17g", cfg_.prior.var[i]);
  std::fprintf(f, "\nseed %" PRIu64 "\n", init_seed_);
  std::fprintf(f, "params %ld\n", static_cast<long>(theta_.size()));
  std::fwrite(theta_.data(), sizeof(double), theta_.size(), f);
  std::fclose(f);
}

FlowModel FlowModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  auto expect_line = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("truncated checkpoint header: " + path);
    if (line.rfind(key, 0) != 0)
      throw IoError("bad checkpoint field, expected '" + key + "' in: " + path);
    return line.substr(key.size());
  };
  if (expect_line("flowmodel ") != "1") throw IoError("unknown checkpoint version");
  FlowConfig cfg;
  cfg.dim = std::stoi(expect_line("dim "));
  cfg.n_layers = std::stoi(expect_line("layers "));
  cfg.hidden = std::stoi(expect_line("hidden "));
  cfg.s_cap = std::stod(expect_line("s_cap "));
  std::string kind = expect_line("prior ");
  Vec mean(cfg.dim), var(cfg.dim);
  {
    std::istringstream ms(expect_line("mean"));
    for (int i = 0; i < cfg.dim; ++i)
      if (!(ms >> mean[i])) throw IoError("bad checkpoint mean vector");
    std::istringstream vs(expect_line("var"));
    for (int i = 0; i < cfg.dim; ++i)
      if (!(vs >> var[i])) throw IoError("bad checkpoint var vector");
  }
  cfg.prior = Prior::diagonal_gaussian(mean, var);
  cfg.prior.kind =
      kind == "standard-normal" ? PriorKind::StandardNormal : PriorKind::DiagonalGaussian;
  std::uint64_t seed = std::stoull(expect_line("seed "));
  long np = std::stol(expect_line("params "));
  FlowModel m(cfg);
  if (np != m.theta_.size()) throw IoError("checkpoint parameter count mismatch");
  in.read(reinterpret_cast<char*>(m.theta_.data()),
          static_cast<std::streamsize>(sizeof(double)) * np);
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double)) * np)
    throw IoError("truncated checkpoint payload: " + path);
  m.init_seed_ = seed;
  return m;
}

}  // namespace qphase
