#include "rsbeam/rsbnn.hpp"

#include "train_loop.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace rsbeam {

namespace {

constexpr double kMuFloor = 1e-6;

// Fixed gain on the lambda logits only. The output layer starts at zero
// (uniform lambda; mu at its bias, set to the uniform dual K/P_t) and the
// gain lets the short, fixed training schedule swing the sigmoid logits
// far enough to express the skewed dual vectors of converged solves. The
// mu channel stays ungained: its targets live on a much finer scale.
constexpr double kLogitGain = 16.0;

void check_layer_index(const UnfoldModel& model, int layer) {
  if (layer < 0 || layer > model.num_layers)
    throw std::invalid_argument("layer index out of range");
}

}  // namespace

UnfoldModel UnfoldModel::init(const SystemConfig& cfg, const UnfoldConfig& ucfg,
                              std::uint64_t seed) {
  cfg.validate();
  if (ucfg.num_layers < 1 || ucfg.hidden_dim < 1)
    throw std::invalid_argument("unfold config: L and M must be positive");
  if (ucfg.epsilon <= 0.0)
    throw std::invalid_argument("unfold config: epsilon must be positive");
  UnfoldModel m;
  m.num_users = cfg.num_users;
  m.num_tx_antennas = cfg.num_tx_antennas;
  m.num_layers = ucfg.num_layers;
  m.hidden_dim = ucfg.hidden_dim;
  m.epsilon = ucfg.epsilon;
  m.detach_aux = ucfg.detach_aux;

  const int d = m.feature_dim();
  const int out = m.num_users + 1;
  std::mt19937_64 rng(seed);
  auto xavier = [&rng](int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    ad::Matrix w(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) w(i, j) = u(rng);
    return w;
  };
  m.layers.resize(m.num_layers + 1);
  for (auto& layer : m.layers) {
    layer.w1 = xavier(m.hidden_dim, d);
    layer.b1 = ad::Matrix::Zero(m.hidden_dim, 1);
    layer.w2 = ad::Matrix::Zero(out, m.hidden_dim);
    layer.b2 = ad::Matrix::Zero(out, 1);
    layer.b2(m.num_users, 0) = cfg.num_users / cfg.total_power;
  }
  return m;
}

// ---- serialization ---------------------------------------------------

namespace {

constexpr char kModelMagic[8] = {'R', 'S', 'B', 'N', 'N', 'M', 'D', 'L'};
constexpr std::uint8_t kModelVersion = 1;

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put(std::ostream& os, T v) {
  put_bytes(os, &v, sizeof(T));
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is)
    throw FileFormatError(std::string("model file truncated while reading ") +
                          what);
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  get_bytes(is, &v, sizeof(T), what);
  return v;
}

void put_matrix(std::ostream& os, const ad::Matrix& m) {
  put_bytes(os, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void get_matrix(std::istream& is, ad::Matrix& m, const char* what) {
  get_bytes(is, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()),
            what);
}

}  // namespace

void save_model(const std::string& path, const UnfoldModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileFormatError("cannot open model file for writing: " + path);
  put_bytes(os, kModelMagic, sizeof(kModelMagic));
  put(os, kModelVersion);
  put(os, static_cast<std::uint32_t>(model.num_users));
  put(os, static_cast<std::uint32_t>(model.num_tx_antennas));
  put(os, static_cast<std::uint32_t>(model.num_layers));
  put(os, static_cast<std::uint32_t>(model.hidden_dim));
  put(os, model.epsilon);
  for (const auto& layer : model.layers) {
    put_matrix(os, layer.w1);
    put_matrix(os, layer.b1);
    put_matrix(os, layer.w2);
    put_matrix(os, layer.b2);
  }
  if (!os) throw FileFormatError("write failed for model file: " + path);
}

UnfoldModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileFormatError("cannot open model file: " + path);
  char magic[8];
  get_bytes(is, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw FileFormatError("bad model magic in " + path);
  const auto version = get<std::uint8_t>(is, "version");
  if (version != kModelVersion)
    throw FileFormatError("unsupported model version in " + path);
  UnfoldModel m;
  m.num_users = static_cast<int>(get<std::uint32_t>(is, "K"));
  m.num_tx_antennas = static_cast<int>(get<std::uint32_t>(is, "N_t"));
  m.num_layers = static_cast<int>(get<std::uint32_t>(is, "L"));
  m.hidden_dim = static_cast<int>(get<std::uint32_t>(is, "M"));
  m.epsilon = get<double>(is, "epsilon");
  if (m.num_users < 1 || m.num_tx_antennas < 1 || m.num_layers < 1 ||
      m.hidden_dim < 1 || m.epsilon <= 0.0)
    throw FileFormatError("invalid model metadata in " + path);
  const int d = m.feature_dim();
  const int out = m.num_users + 1;
  m.layers.resize(m.num_layers + 1);
  for (auto& layer : m.layers) {
    layer.w1.resize(m.hidden_dim, d);
    layer.b1.resize(m.hidden_dim, 1);
    layer.w2.resize(out, m.hidden_dim);
    layer.b2.resize(out, 1);
    get_matrix(is, layer.w1, "W1");
    get_matrix(is, layer.b1, "b1");
    get_matrix(is, layer.w2, "W2");
    get_matrix(is, layer.b2, "b2");
  }
  return m;
}

// ---- plain forward ---------------------------------------------------

namespace {

// Compress the per-user channel magnitude through log1p while keeping the
// direction: path loss spreads ||h_k|| over orders of magnitude, and the
// dual networks must resolve the *weakest* user, which raw Re/Im features
// bury in the scale of the strongest one.
Eigen::MatrixXcd compress_channels(const Eigen::MatrixXcd& h) {
  Eigen::MatrixXcd out = h;
  for (int k = 0; k < h.cols(); ++k) {
    const double r = h.col(k).norm();
    if (r > 0.0) out.col(k) *= std::log1p(r) / r;
  }
  return out;
}

}  // namespace

VectorXd build_features(const ChannelSample& ch, const BeamMatrix& p_prev,
                        const VectorXd& xi_prev) {
  const int nt = static_cast<int>(ch.channels.rows());
  const int k_users = static_cast<int>(ch.channels.cols());
  if (p_prev.cols.rows() != nt || p_prev.cols.cols() != k_users + 1)
    throw DimensionError("build_features: beam matrix shape mismatch");
  if (xi_prev.size() != k_users + 1)
    throw DimensionError("build_features: xi length mismatch");
  VectorXd feat(2 * k_users * nt + 2 * (k_users + 1) * nt + k_users + 1);
  const Eigen::MatrixXcd hc = compress_channels(ch.channels);
  int pos = 0;
  for (int k = 0; k < k_users; ++k)
    for (int n = 0; n < nt; ++n) feat(pos++) = hc(n, k).real();
  for (int k = 0; k < k_users; ++k)
    for (int n = 0; n < nt; ++n) feat(pos++) = hc(n, k).imag();
  for (int i = 0; i <= k_users; ++i)
    for (int n = 0; n < nt; ++n) feat(pos++) = p_prev.cols(n, i).real();
  for (int i = 0; i <= k_users; ++i)
    for (int n = 0; n < nt; ++n) feat(pos++) = p_prev.cols(n, i).imag();
  feat.segment(pos, k_users + 1) = xi_prev;
  return feat;
}

LayerOutput layer_forward(const UnfoldModel& model, int layer,
                          const VectorXd& features) {
  check_layer_index(model, layer);
  if (features.size() != model.feature_dim())
    throw DimensionError("layer_forward: feature length mismatch");
  const DenseLayer& net = model.layers[layer];
  const VectorXd hidden =
      (net.w1 * features + net.b1.col(0)).cwiseMax(0.0);
  const VectorXd out = net.w2 * hidden + net.b2.col(0);
  LayerOutput lo;
  lo.lambda_raw =
      out.head(model.num_users).unaryExpr([](double x) {
        return 1.0 / (1.0 + std::exp(-kLogitGain * x));
      });
  lo.mu = std::abs(out(model.num_users)) + kMuFloor;
  return lo;
}

VectorXd normalize_lambda(const VectorXd& lambda_raw, double epsilon) {
  if (epsilon <= 0.0)
    throw std::invalid_argument("normalize_lambda: epsilon must be positive");
  const double denom =
      lambda_raw.sum() + epsilon * static_cast<double>(lambda_raw.size());
  return (lambda_raw.array() + epsilon).matrix() / denom;
}

BeamMatrix rectify_power(const BeamMatrix& p, double total_power) {
  const double used = power_used(p);
  if (!(used > 0.0))
    throw std::invalid_argument("rectify_power: zero beamforming matrix");
  BeamMatrix out = p;
  out.cols *= std::sqrt(total_power / used);
  return out;
}

BeamMatrix unfold_forward(const UnfoldModel& model, const SystemConfig& cfg,
                          const ChannelSample& ch, UnfoldTrace* trace) {
  if (model.num_users != cfg.num_users ||
      model.num_tx_antennas != cfg.num_tx_antennas)
    throw DimensionError("unfold_forward: model/config mismatch");
  BeamMatrix p = init_beamformers(cfg, ch);
  DualState xi = DualState::uniform(cfg.num_users, cfg.total_power);
  if (trace) {
    trace->xis.clear();
    trace->beams.clear();
    trace->beams.push_back(p);
  }
  // xi^[0] from the dedicated first network
  {
    const LayerOutput lo =
        layer_forward(model, 0, build_features(ch, p, xi.concat()));
    xi.lambda = normalize_lambda(lo.lambda_raw, model.epsilon);
    xi.mu = lo.mu;
  }
  if (trace) trace->xis.push_back(xi.concat());
  for (int l = 1; l <= model.num_layers; ++l) {
    const AuxState aux = update_aux(cfg, ch, p);
    const LayerOutput lo =
        layer_forward(model, l, build_features(ch, p, xi.concat()));
    xi.lambda = normalize_lambda(lo.lambda_raw, model.epsilon);
    xi.mu = lo.mu;
    p = rectify_power(obs_beamformers(cfg, ch, aux, xi), cfg.total_power);
    if (trace) {
      trace->xis.push_back(xi.concat());
      trace->beams.push_back(p);
    }
  }
  return p;
}

double supervised_loss(const UnfoldTrace& trace, const VectorXd& xi_first,
                       const VectorXd& xi_last) {
  if (trace.xis.empty())
    throw std::invalid_argument("supervised_loss: empty trace");
  return (trace.xis.front() - xi_first).squaredNorm() +
         (trace.xis.back() - xi_last).squaredNorm();
}

double unsupervised_loss(const SystemConfig& cfg, const ChannelSample& ch,
                         const BeamMatrix& p_final) {
  return -rate_report(cfg, ch, p_final).sum_rate;
}

// ---- differentiable pipeline -----------------------------------------

namespace graph {

namespace {

using ad::CVar;
using ad::Var;

// complex scalar s times complex matrix v
CVar cmul_scalar(CVar s, CVar v) {
  return {ad::sub(ad::scale(s.re, v.re), ad::scale(s.im, v.im)),
          ad::add(ad::scale(s.re, v.im), ad::scale(s.im, v.re))};
}

struct SampleConstants {
  Var one, sigma2, total_power, eye, eps, k_eps, mu_floor, logit_gain,
      h_features;
  std::vector<CVar> h;        // h_k, N_t x 1
  std::vector<CVar> h_herm;   // h_k^H, 1 x N_t
  std::vector<Var> outer_re;  // Re(h_k h_k^H)
  std::vector<Var> outer_im;  // Im(h_k h_k^H)
};

SampleConstants make_constants(ad::Tape& tape, const UnfoldModel& model,
                               const SystemConfig& cfg,
                               const ChannelSample& ch) {
  const int k_users = cfg.num_users;
  const int nt = cfg.num_tx_antennas;
  SampleConstants c;
  c.one = tape.constant(ad::Matrix::Constant(1, 1, 1.0));
  c.sigma2 = tape.constant(ad::Matrix::Constant(1, 1, cfg.noise_power));
  c.total_power = tape.constant(ad::Matrix::Constant(1, 1, cfg.total_power));
  c.eye = tape.constant(ad::Matrix::Identity(nt, nt));
  c.eps = tape.constant(ad::Matrix::Constant(1, 1, model.epsilon));
  c.k_eps = tape.constant(ad::Matrix::Constant(1, 1, k_users * model.epsilon));
  c.mu_floor = tape.constant(ad::Matrix::Constant(1, 1, kMuFloor));
  c.logit_gain = tape.constant(ad::Matrix::Constant(1, 1, kLogitGain));
  ad::Matrix hfeat(2 * k_users * nt, 1);
  const Eigen::MatrixXcd hc = compress_channels(ch.channels);
  int pos = 0;
  for (int k = 0; k < k_users; ++k)
    for (int n = 0; n < nt; ++n) hfeat(pos++) = hc(n, k).real();
  for (int k = 0; k < k_users; ++k)
    for (int n = 0; n < nt; ++n) hfeat(pos++) = hc(n, k).imag();
  c.h_features = tape.constant(std::move(hfeat));
  for (int k = 0; k < k_users; ++k) {
    const VectorXcd hk = ch.channels.col(k);
    c.h.push_back({tape.constant(hk.real()), tape.constant(hk.imag())});
    c.h_herm.push_back({tape.constant(hk.real().transpose()),
                        tape.constant((-hk.imag()).transpose())});
    const MatrixXcd outer = hk * hk.adjoint();
    c.outer_re.push_back(tape.constant(outer.real()));
    c.outer_im.push_back(tape.constant(outer.imag()));
  }
  return c;
}

struct UserAux {
  Var sqrt1p_common, sqrt1p_private;  // sqrt(1 + alpha)
  CVar beta_common, beta_private;
};

// FP aux block for user k at the current beams, optionally detached.
UserAux user_aux(const SampleConstants& c, const std::vector<CVar>& p, int k,
                 bool detach) {
  const int k_users = static_cast<int>(c.h.size());
  std::vector<Var> gains(k_users + 1);
  std::vector<CVar> inner(k_users + 1);
  for (int i = 0; i <= k_users; ++i) {
    inner[i] = ad::cmatmul(c.h_herm[k], p[i]);
    gains[i] = ad::cabs2(inner[i]);
  }
  Var priv_total = gains[1];
  for (int i = 2; i <= k_users; ++i) priv_total = ad::add(priv_total, gains[i]);
  const Var total = ad::add(gains[0], priv_total);
  Var interference;  // private-stream interference, excludes own gain
  bool has_interference = false;
  for (int i = 1; i <= k_users; ++i) {
    if (i == k + 1) continue;
    interference = has_interference ? ad::add(interference, gains[i]) : gains[i];
    has_interference = true;
  }
  const Var denom_c = ad::add(priv_total, c.sigma2);
  const Var denom_p = has_interference
                          ? ad::add(interference, c.sigma2)
                          : c.sigma2;
  const Var gamma_c = ad::mul(gains[0], ad::reciprocal(denom_c));
  const Var gamma_p = ad::mul(gains[k + 1], ad::reciprocal(denom_p));
  UserAux a;
  a.sqrt1p_common = ad::sqrt_v(ad::add(c.one, gamma_c));
  a.sqrt1p_private = ad::sqrt_v(ad::add(c.one, gamma_p));
  a.beta_common = ad::cscale(
      ad::mul(a.sqrt1p_common, ad::reciprocal(ad::add(total, c.sigma2))),
      inner[0]);
  a.beta_private = ad::cscale(
      ad::mul(a.sqrt1p_private, ad::reciprocal(denom_c)), inner[k + 1]);
  if (detach) {
    a.sqrt1p_common = ad::detach(a.sqrt1p_common);
    a.sqrt1p_private = ad::detach(a.sqrt1p_private);
    a.beta_common = {ad::detach(a.beta_common.re), ad::detach(a.beta_common.im)};
    a.beta_private = {ad::detach(a.beta_private.re),
                      ad::detach(a.beta_private.im)};
  }
  return a;
}

Var features(const SampleConstants& c, const std::vector<CVar>& p, Var lambda,
             Var mu) {
  std::vector<Var> parts;
  parts.push_back(c.h_features);
  for (const CVar& col : p) parts.push_back(col.re);
  for (const CVar& col : p) parts.push_back(col.im);
  parts.push_back(lambda);
  parts.push_back(mu);
  return ad::concat_rows(parts);
}

struct XiVars {
  Var lambda;  // K x 1, on the simplex after the floor
  Var mu;      // 1 x 1, positive
};

XiVars predict_xi(const UnfoldModel& model, const std::vector<Var>& params,
                  const SampleConstants& c, int layer, Var feat) {
  const int k_users = model.num_users;
  const Var w1 = params[4 * layer];
  const Var b1 = params[4 * layer + 1];
  const Var w2 = params[4 * layer + 2];
  const Var b2 = params[4 * layer + 3];
  const Var out = ad::affine(w2, ad::relu(ad::affine(w1, feat, b1)), b2);
  const Var raw =
      ad::sigmoid(ad::scale(c.logit_gain, ad::rows(out, 0, k_users)));
  XiVars xi;
  xi.mu = ad::add(ad::abs_v(ad::rows(out, k_users, 1)), c.mu_floor);
  xi.lambda = ad::scale(ad::reciprocal(ad::add(ad::sum(raw), c.k_eps)),
                        ad::add(raw, c.eps));
  return xi;
}

// Closed-form beamformers from the aux/dual blocks, then power rectification.
std::vector<CVar> obs_and_rectify(const SampleConstants& c,
                                  const std::vector<UserAux>& aux,
                                  const XiVars& xi) {
  const int k_users = static_cast<int>(aux.size());
  Var a_c_re, a_c_im, a_p_re, a_p_im;
  CVar rhs_c;
  for (int j = 0; j < k_users; ++j) {
    const Var lam_j = ad::rows(xi.lambda, j, 1);
    const Var beta_c2 = ad::cabs2(aux[j].beta_common);
    const Var w_c = ad::mul(lam_j, beta_c2);
    const Var w_p = ad::add(ad::cabs2(aux[j].beta_private), w_c);
    const Var tc_re = ad::scale(w_c, c.outer_re[j]);
    const Var tc_im = ad::scale(w_c, c.outer_im[j]);
    const Var tp_re = ad::scale(w_p, c.outer_re[j]);
    const Var tp_im = ad::scale(w_p, c.outer_im[j]);
    const CVar rc = cmul_scalar(
        ad::cscale(ad::mul(lam_j, aux[j].sqrt1p_common), aux[j].beta_common),
        c.h[j]);
    if (j == 0) {
      a_c_re = tc_re;
      a_c_im = tc_im;
      a_p_re = tp_re;
      a_p_im = tp_im;
      rhs_c = rc;
    } else {
      a_c_re = ad::add(a_c_re, tc_re);
      a_c_im = ad::add(a_c_im, tc_im);
      a_p_re = ad::add(a_p_re, tp_re);
      a_p_im = ad::add(a_p_im, tp_im);
      rhs_c = ad::cadd(rhs_c, rc);
    }
  }
  a_c_re = ad::add(a_c_re, ad::scale(xi.mu, c.eye));
  a_p_re = ad::add(a_p_re, ad::scale(xi.mu, c.eye));

  std::vector<CVar> p(k_users + 1);
  p[0] = ad::herm_solve({a_c_re, a_c_im}, rhs_c);
  for (int k = 0; k < k_users; ++k) {
    const CVar rhs = cmul_scalar(
        ad::cscale(aux[k].sqrt1p_private, aux[k].beta_private), c.h[k]);
    p[k + 1] = ad::herm_solve({a_p_re, a_p_im}, rhs);
  }

  Var power = ad::sum(ad::cabs2(p[0]));
  for (int i = 1; i <= k_users; ++i)
    power = ad::add(power, ad::sum(ad::cabs2(p[i])));
  const Var factor =
      ad::sqrt_v(ad::mul(c.total_power, ad::reciprocal(power)));
  for (auto& col : p) col = ad::cscale(factor, col);
  return p;
}

Var sum_rate_cols(const std::vector<CVar>& h_herm, Var sigma2,
                  const std::vector<CVar>& p) {
  const int k_users = static_cast<int>(h_herm.size());
  std::vector<Var> common_rates;
  Var private_sum;
  for (int k = 0; k < k_users; ++k) {
    std::vector<Var> gains(k_users + 1);
    for (int i = 0; i <= k_users; ++i)
      gains[i] = ad::cabs2(ad::cmatmul(h_herm[k], p[i]));
    Var priv_total = gains[1];
    for (int i = 2; i <= k_users; ++i)
      priv_total = ad::add(priv_total, gains[i]);
    Var interference;
    bool has_interference = false;
    for (int i = 1; i <= k_users; ++i) {
      if (i == k + 1) continue;
      interference =
          has_interference ? ad::add(interference, gains[i]) : gains[i];
      has_interference = true;
    }
    const Var gamma_c =
        ad::mul(gains[0], ad::reciprocal(ad::add(priv_total, sigma2)));
    const Var denom_p =
        has_interference ? ad::add(interference, sigma2) : sigma2;
    const Var gamma_p = ad::mul(gains[k + 1], ad::reciprocal(denom_p));
    common_rates.push_back(ad::log2_1p(gamma_c));
    const Var rk = ad::log2_1p(gamma_p);
    private_sum = (k == 0) ? rk : ad::add(private_sum, rk);
  }
  const Var common_rate = ad::min_over_index(ad::concat_rows(common_rates));
  return ad::add(common_rate, private_sum);
}

}  // namespace

std::vector<Var> insert_params(ad::Tape& tape, const UnfoldModel& model) {
  std::vector<Var> params;
  params.reserve(4 * model.layers.size());
  for (const auto& layer : model.layers) {
    params.push_back(tape.param(layer.w1));
    params.push_back(tape.param(layer.b1));
    params.push_back(tape.param(layer.w2));
    params.push_back(tape.param(layer.b2));
  }
  return params;
}

SampleLosses build_sample(ad::Tape& tape, const UnfoldModel& model,
                          const std::vector<ad::Var>& params,
                          const SystemConfig& cfg, const ChannelSample& ch,
                          const VectorXd* xi_first, const VectorXd* xi_last) {
  if (model.num_users != cfg.num_users ||
      model.num_tx_antennas != cfg.num_tx_antennas)
    throw DimensionError("build_sample: model/config mismatch");
  if (params.size() != 4 * model.layers.size())
    throw std::invalid_argument("build_sample: wrong parameter count");
  const int k_users = cfg.num_users;
  const SampleConstants c = make_constants(tape, model, cfg, ch);

  const BeamMatrix p0 = init_beamformers(cfg, ch);
  std::vector<CVar> p(k_users + 1);
  for (int i = 0; i <= k_users; ++i)
    p[i] = {tape.constant(p0.cols.col(i).real()),
            tape.constant(p0.cols.col(i).imag())};
  const DualState uniform = DualState::uniform(k_users, cfg.total_power);
  XiVars xi;
  xi.lambda = tape.constant(uniform.lambda);
  xi.mu = tape.constant(ad::Matrix::Constant(1, 1, uniform.mu));

  SampleLosses out;
  xi = predict_xi(model, params, c, 0, features(c, p, xi.lambda, xi.mu));
  out.xi.push_back(ad::concat_rows({xi.lambda, xi.mu}));

  for (int l = 1; l <= model.num_layers; ++l) {
    std::vector<UserAux> aux;
    aux.reserve(k_users);
    for (int k = 0; k < k_users; ++k)
      aux.push_back(user_aux(c, p, k, model.detach_aux));
    xi = predict_xi(model, params, c, l, features(c, p, xi.lambda, xi.mu));
    out.xi.push_back(ad::concat_rows({xi.lambda, xi.mu}));
    p = obs_and_rectify(c, aux, xi);
  }

  out.unsupervised = ad::neg(sum_rate_cols(c.h_herm, c.sigma2, p));
  if (xi_first && xi_last) {
    if (xi_first->size() != k_users + 1 || xi_last->size() != k_users + 1)
      throw DimensionError("build_sample: label length mismatch");
    const Var d0 = ad::sub(out.xi.front(), tape.constant(*xi_first));
    const Var dl = ad::sub(out.xi.back(), tape.constant(*xi_last));
    out.supervised = ad::add(ad::sum(ad::mul(d0, d0)), ad::sum(ad::mul(dl, dl)));
  }
  return out;
}

Var sum_rate(ad::Tape& tape, const SystemConfig& cfg, const ChannelSample& ch,
             const std::vector<CVar>& p) {
  if (static_cast<int>(p.size()) != cfg.num_users + 1)
    throw DimensionError("sum_rate: expected K+1 beam columns");
  const Var sigma2 =
      tape.constant(ad::Matrix::Constant(1, 1, cfg.noise_power));
  std::vector<CVar> h_herm;
  h_herm.reserve(cfg.num_users);
  for (int k = 0; k < cfg.num_users; ++k) {
    const VectorXcd hk = ch.channels.col(k);
    h_herm.push_back({tape.constant(hk.real().transpose()),
                      tape.constant((-hk.imag()).transpose())});
  }
  return sum_rate_cols(h_herm, sigma2, p);
}

}  // namespace graph

// ---- training --------------------------------------------------------

namespace {

std::vector<ad::Matrix> flatten(const UnfoldModel& model) {
  std::vector<ad::Matrix> flat;
  flat.reserve(4 * model.layers.size());
  for (const auto& layer : model.layers) {
    flat.push_back(layer.w1);
    flat.push_back(layer.b1);
    flat.push_back(layer.w2);
    flat.push_back(layer.b2);
  }
  return flat;
}

void unflatten(UnfoldModel& model, const std::vector<ad::Matrix>& flat) {
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    model.layers[l].w1 = flat[4 * l];
    model.layers[l].b1 = flat[4 * l + 1];
    model.layers[l].w2 = flat[4 * l + 2];
    model.layers[l].b2 = flat[4 * l + 3];
  }
}

}  // namespace

TrainHistory train(UnfoldModel& model, const SystemConfig& cfg,
                   const std::vector<ChannelSample>& samples,
                   const DualLabels& labels, const TrainConfig& tcfg) {
  if (labels.entries.size() != samples.size())
    throw std::invalid_argument("train: label/sample count mismatch");

  std::vector<int> usable;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (labels.entries[i].valid) usable.push_back(static_cast<int>(i));

  detail::TrainHooks hooks;
  hooks.insert_params = [&model](ad::Tape& tape) {
    return graph::insert_params(tape, model);
  };
  hooks.get_weights = [&model] { return flatten(model); };
  hooks.set_weights = [&model](const std::vector<ad::Matrix>& w) {
    unflatten(model, w);
  };
  hooks.sample_loss = [&](ad::Tape& tape, const std::vector<ad::Var>& params,
                          int i, bool supervised) {
    const graph::SampleLosses losses = graph::build_sample(
        tape, model, params, cfg, samples[i],
        supervised ? &labels.entries[i].xi_first : nullptr,
        supervised ? &labels.entries[i].xi_last : nullptr);
    return supervised ? losses.supervised : losses.unsupervised;
  };
  hooks.plain_eval = [&](int i, bool supervised, double* sr) {
    UnfoldTrace trace;
    const BeamMatrix p = unfold_forward(model, cfg, samples[i], &trace);
    if (sr) *sr = rate_report(cfg, samples[i], p).sum_rate;
    return supervised ? supervised_loss(trace, labels.entries[i].xi_first,
                                        labels.entries[i].xi_last)
                      : unsupervised_loss(cfg, samples[i], p);
  };
  return detail::run_two_phase(tcfg, usable, hooks);
}

}  // namespace rsbeam
