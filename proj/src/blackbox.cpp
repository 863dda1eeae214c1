#include "rsbeam/blackbox.hpp"

#include "train_loop.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace rsbeam {

BlackboxModel BlackboxModel::init(const SystemConfig& cfg,
                                  const BlackboxConfig& bcfg,
                                  std::uint64_t seed) {
  cfg.validate();
  if (bcfg.hidden_multiplier < 1)
    throw std::invalid_argument("blackbox config: multiplier must be >= 1");
  BlackboxModel m;
  m.num_users = cfg.num_users;
  m.num_tx_antennas = cfg.num_tx_antennas;
  m.hidden_dim = bcfg.hidden_multiplier * 2 * cfg.num_users *
                 cfg.num_tx_antennas;
  std::mt19937_64 rng(seed);
  auto xavier = [&rng](int rows, int cols) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    ad::Matrix w(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) w(i, j) = u(rng);
    return w;
  };
  m.w1 = xavier(m.hidden_dim, m.input_dim());
  m.b1 = ad::Matrix::Zero(m.hidden_dim, 1);
  m.w2 = xavier(m.hidden_dim, m.hidden_dim);
  m.b2 = ad::Matrix::Zero(m.hidden_dim, 1);
  m.w3 = xavier(m.output_dim(), m.hidden_dim);
  m.b3 = ad::Matrix::Zero(m.output_dim(), 1);
  return m;
}

// ---- serialization ---------------------------------------------------

namespace {

constexpr char kBlackboxMagic[8] = {'R', 'S', 'B', 'B', 'O', 'X', 'M', 'D'};
constexpr std::uint8_t kBlackboxVersion = 1;

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

std::vector<ad::Matrix> flatten(const BlackboxModel& m) {
  return {m.w1, m.b1, m.w2, m.b2, m.w3, m.b3};
}

void unflatten(BlackboxModel& m, const std::vector<ad::Matrix>& flat) {
  m.w1 = flat[0];
  m.b1 = flat[1];
  m.w2 = flat[2];
  m.b2 = flat[3];
  m.w3 = flat[4];
  m.b3 = flat[5];
}

// output vector layout: Re(P) column-major, then Im(P)
MatrixXcd unstack_beams(const VectorXd& out, int nt, int k_users) {
  MatrixXcd p(nt, k_users + 1);
  const int half = nt * (k_users + 1);
  for (int i = 0; i <= k_users; ++i)
    for (int n = 0; n < nt; ++n)
      p(n, i) = {out(i * nt + n), out(half + i * nt + n)};
  return p;
}

}  // namespace

void save_blackbox(const std::string& path, const BlackboxModel& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FileFormatError("cannot open model file for writing: " + path);
  put_bytes(os, kBlackboxMagic, sizeof(kBlackboxMagic));
  put(os, kBlackboxVersion);
  put(os, static_cast<std::uint32_t>(model.num_users));
  put(os, static_cast<std::uint32_t>(model.num_tx_antennas));
  put(os, static_cast<std::uint32_t>(model.hidden_dim));
  for (const ad::Matrix* m :
       {&model.w1, &model.b1, &model.w2, &model.b2, &model.w3, &model.b3})
    put_matrix(os, *m);
  if (!os) throw FileFormatError("write failed for model file: " + path);
}

BlackboxModel load_blackbox(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FileFormatError("cannot open model file: " + path);
  char magic[8];
  get_bytes(is, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kBlackboxMagic, sizeof(magic)) != 0)
    throw FileFormatError("bad model magic in " + path);
  if (get<std::uint8_t>(is, "version") != kBlackboxVersion)
    throw FileFormatError("unsupported model version in " + path);
  BlackboxModel m;
  m.num_users = static_cast<int>(get<std::uint32_t>(is, "K"));
  m.num_tx_antennas = static_cast<int>(get<std::uint32_t>(is, "N_t"));
  m.hidden_dim = static_cast<int>(get<std::uint32_t>(is, "hidden"));
  if (m.num_users < 1 || m.num_tx_antennas < 1 || m.hidden_dim < 1)
    throw FileFormatError("invalid model metadata in " + path);
  m.w1.resize(m.hidden_dim, m.input_dim());
  m.b1.resize(m.hidden_dim, 1);
  m.w2.resize(m.hidden_dim, m.hidden_dim);
  m.b2.resize(m.hidden_dim, 1);
  m.w3.resize(m.output_dim(), m.hidden_dim);
  m.b3.resize(m.output_dim(), 1);
  get_matrix(is, m.w1, "W1");
  get_matrix(is, m.b1, "b1");
  get_matrix(is, m.w2, "W2");
  get_matrix(is, m.b2, "b2");
  get_matrix(is, m.w3, "W3");
  get_matrix(is, m.b3, "b3");
  return m;
}

// ---- forward ---------------------------------------------------------

VectorXd blackbox_features(const ChannelSample& ch) {
  const int nt = static_cast<int>(ch.channels.rows());
  const int k_users = static_cast<int>(ch.channels.cols());
  VectorXd feat(2 * k_users * nt);
  int pos = 0;
  for (int k = 0; k < k_users; ++k)
    for (int n = 0; n < nt; ++n) feat(pos++) = ch.channels(n, k).real();
  for (int k = 0; k < k_users; ++k)
    for (int n = 0; n < nt; ++n) feat(pos++) = ch.channels(n, k).imag();
  return feat;
}

BeamMatrix blackbox_forward(const BlackboxModel& model,
                            const SystemConfig& cfg,
                            const ChannelSample& ch) {
  if (model.num_users != cfg.num_users ||
      model.num_tx_antennas != cfg.num_tx_antennas)
    throw DimensionError("blackbox_forward: model/config mismatch");
  const VectorXd feat = blackbox_features(ch);
  const VectorXd h1 = (model.w1 * feat + model.b1.col(0)).cwiseMax(0.0);
  const VectorXd h2 = (model.w2 * h1 + model.b2.col(0)).cwiseMax(0.0);
  const VectorXd out = model.w3 * h2 + model.b3.col(0);
  BeamMatrix p{unstack_beams(out, cfg.num_tx_antennas, cfg.num_users)};
  return rectify_power(p, cfg.total_power);
}

// ---- differentiable pipeline -----------------------------------------

namespace graph {

std::vector<ad::Var> insert_blackbox_params(ad::Tape& tape,
                                            const BlackboxModel& model) {
  return {tape.param(model.w1), tape.param(model.b1), tape.param(model.w2),
          tape.param(model.b2), tape.param(model.w3), tape.param(model.b3)};
}

BlackboxLosses build_blackbox_sample(ad::Tape& tape,
                                     const BlackboxModel& model,
                                     const std::vector<ad::Var>& params,
                                     const SystemConfig& cfg,
                                     const ChannelSample& ch,
                                     const MatrixXcd* label_beams) {
  if (model.num_users != cfg.num_users ||
      model.num_tx_antennas != cfg.num_tx_antennas)
    throw DimensionError("build_blackbox_sample: model/config mismatch");
  if (params.size() != 6)
    throw std::invalid_argument("build_blackbox_sample: wrong parameter count");
  const int nt = cfg.num_tx_antennas;
  const int k_users = cfg.num_users;
  const int half = nt * (k_users + 1);

  const ad::Var feat = tape.constant(blackbox_features(ch));
  const ad::Var h1 = ad::relu(ad::affine(params[0], feat, params[1]));
  const ad::Var h2 = ad::relu(ad::affine(params[2], h1, params[3]));
  const ad::Var out = ad::affine(params[4], h2, params[5]);

  std::vector<ad::CVar> p(k_users + 1);
  for (int i = 0; i <= k_users; ++i)
    p[i] = {ad::rows(out, i * nt, nt), ad::rows(out, half + i * nt, nt)};

  ad::Var power = ad::sum(ad::cabs2(p[0]));
  for (int i = 1; i <= k_users; ++i)
    power = ad::add(power, ad::sum(ad::cabs2(p[i])));
  const ad::Var pt = tape.constant(ad::Matrix::Constant(1, 1, cfg.total_power));
  const ad::Var factor = ad::sqrt_v(ad::mul(pt, ad::reciprocal(power)));
  for (auto& col : p) col = ad::cscale(factor, col);

  BlackboxLosses out_losses;
  out_losses.unsupervised = ad::neg(sum_rate(tape, cfg, ch, p));
  if (label_beams) {
    if (label_beams->rows() != nt || label_beams->cols() != k_users + 1)
      throw DimensionError("build_blackbox_sample: label shape mismatch");
    ad::Var sq;
    for (int i = 0; i <= k_users; ++i) {
      const ad::Var dre =
          ad::sub(p[i].re, tape.constant(label_beams->col(i).real()));
      const ad::Var dim =
          ad::sub(p[i].im, tape.constant(label_beams->col(i).imag()));
      const ad::Var term =
          ad::add(ad::sum(ad::mul(dre, dre)), ad::sum(ad::mul(dim, dim)));
      sq = (i == 0) ? term : ad::add(sq, term);
    }
    out_losses.supervised = sq;
  }
  return out_losses;
}

}  // namespace graph

// ---- training --------------------------------------------------------

TrainHistory train_blackbox(BlackboxModel& model, const SystemConfig& cfg,
                            const std::vector<ChannelSample>& samples,
                            const BeamLabels& labels,
                            const TrainConfig& tcfg) {
  if (labels.entries.size() != samples.size())
    throw std::invalid_argument("train_blackbox: label/sample count mismatch");

  std::vector<int> usable;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (labels.entries[i].valid) usable.push_back(static_cast<int>(i));

  detail::TrainHooks hooks;
  hooks.insert_params = [&model](ad::Tape& tape) {
    return graph::insert_blackbox_params(tape, model);
  };
  hooks.get_weights = [&model] { return flatten(model); };
  hooks.set_weights = [&model](const std::vector<ad::Matrix>& w) {
    unflatten(model, w);
  };
  hooks.sample_loss = [&](ad::Tape& tape, const std::vector<ad::Var>& params,
                          int i, bool supervised) {
    const graph::BlackboxLosses losses = graph::build_blackbox_sample(
        tape, model, params, cfg, samples[i],
        supervised ? &labels.entries[i].beams : nullptr);
    return supervised ? losses.supervised : losses.unsupervised;
  };
  hooks.plain_eval = [&](int i, bool supervised, double* sr) {
    const BeamMatrix p = blackbox_forward(model, cfg, samples[i]);
    if (sr) *sr = rate_report(cfg, samples[i], p).sum_rate;
    if (supervised)
      return (p.cols - labels.entries[i].beams).squaredNorm();
    return -rate_report(cfg, samples[i], p).sum_rate;
  };
  return detail::run_two_phase(tcfg, usable, hooks);
}

}  // namespace rsbeam
