#include "gmmest/observation.hpp"

#include <cmath>
#include <set>

namespace gmmest {

std::string to_string(ObservationKind k) {
  switch (k) {
    case ObservationKind::simo_identity: return "simo_identity";
    case ObservationKind::mimo_pilot: return "mimo_pilot";
    case ObservationKind::wideband_selection: return "wideband_selection";
  }
  return "?";
}

std::string to_string(PilotLayout l) {
  switch (l) {
    case PilotLayout::block: return "block";
    case PilotLayout::comb: return "comb";
    case PilotLayout::lattice: return "lattice";
  }
  return "?";
}

PilotLayout pilot_layout_from_string(const std::string& s) {
  if (s == "block") return PilotLayout::block;
  if (s == "comb") return PilotLayout::comb;
  if (s == "lattice") return PilotLayout::lattice;
  throw ConfigError("unknown pilot layout '" + s + "'");
}

void PilotPattern::validate() const {
  if (n_c < 1 || n_t < 1) throw InvariantError("pilot pattern: empty grid");
  if (static_cast<Eigen::Index>(positions.size()) != n_p)
    throw InvariantError("pilot pattern: position count differs from n_p");
  if (n_p > n_c * n_t) throw InvariantError("pilot pattern: more pilots than resource elements");
  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  for (const auto& pos : positions) {
    if (pos.first < 0 || pos.first >= n_c || pos.second < 0 || pos.second >= n_t)
      throw InvariantError("pilot pattern: position outside the grid");
    if (!seen.insert(pos).second) throw InvariantError("pilot pattern: duplicate position");
  }
}

PilotPattern make_pattern(PilotLayout layout, Eigen::Index n_c, Eigen::Index n_t,
                          Eigen::Index n_p) {
  if (n_c < 1 || n_t < 1) throw ConfigError("make_pattern: grid must be nonempty");
  if (n_p < 1 || n_p > n_c * n_t) throw ConfigError("make_pattern: need 1 <= n_p <= n_c * n_t");
  PilotPattern p{layout, n_c, n_t, n_p, {}};
  if (layout == PilotLayout::block) {
    for (Eigen::Index i = 0; i < n_p; ++i) p.positions.emplace_back(i % n_c, i / n_c);
    return p;
  }
  if (n_p % n_t != 0)
    throw ConfigError("make_pattern: comb and lattice layouts need n_p to be a multiple of n_t");
  const Eigen::Index q = n_p / n_t;
  const Eigen::Index spacing = n_c / q;
  for (Eigen::Index t = 0; t < n_t; ++t) {
    const Eigen::Index offset = (layout == PilotLayout::lattice && t % 2 == 1) ? spacing / 2 : 0;
    for (Eigen::Index i = 0; i < q; ++i) p.positions.emplace_back(i * n_c / q + offset, t);
  }
  p.validate();
  return p;
}

namespace {

void check_sigma2(double sigma2) {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
    throw ConfigError("noise variance must be finite and nonnegative");
}

}  // namespace

ObservationModel ObservationModel::with_sigma2(double sigma2) const {
  check_sigma2(sigma2);
  ObservationModel out = *this;
  out.sigma2_ = sigma2;
  return out;
}

ObservationModel simo_model(Eigen::Index n, double sigma2) {
  require_dim(n >= 1, "simo_model: need at least one antenna");
  check_sigma2(sigma2);
  ObservationModel mdl;
  mdl.kind_ = ObservationKind::simo_identity;
  mdl.a_ = CMatrix::Identity(n, n);
  mdl.sigma2_ = sigma2;
  return mdl;
}

CMatrix dft_pilot_matrix(Eigen::Index n_tx, Eigen::Index n_p) {
  require_dim(n_tx >= 1 && n_p >= 1, "dft_pilot_matrix: dimensions must be positive");
  const Eigen::Index len = std::max(n_tx, n_p);
  CMatrix p(n_tx, n_p);
  for (Eigen::Index t = 0; t < n_tx; ++t)
    for (Eigen::Index c = 0; c < n_p; ++c)
      p(t, c) = std::polar(1.0 / std::sqrt(static_cast<double>(n_tx)),
                           -2.0 * kPi * static_cast<double>((t * c) % len) / static_cast<double>(len));
  return p;
}

ObservationModel mimo_model_with_pilots(Eigen::Index n_rx, const CMatrix& pilots, double sigma2) {
  require_dim(n_rx >= 1 && pilots.rows() >= 1 && pilots.cols() >= 1,
              "mimo_model: dimensions must be positive");
  check_sigma2(sigma2);
  ObservationModel mdl;
  mdl.kind_ = ObservationKind::mimo_pilot;
  mdl.a_ = kron(CMatrix(pilots.transpose()), CMatrix(CMatrix::Identity(n_rx, n_rx)));
  mdl.sigma2_ = sigma2;
  mdl.n_rx_ = n_rx;
  mdl.n_tx_ = pilots.rows();
  mdl.pilots_ = pilots;
  mdl.custom_pilots_ = true;
  return mdl;
}

ObservationModel mimo_model(Eigen::Index n_rx, Eigen::Index n_tx, Eigen::Index n_p,
                            double sigma2) {
  ObservationModel mdl = mimo_model_with_pilots(n_rx, dft_pilot_matrix(n_tx, n_p), sigma2);
  mdl.custom_pilots_ = false;
  return mdl;
}

ObservationModel wideband_model(const PilotPattern& pattern, double sigma2) {
  pattern.validate();
  check_sigma2(sigma2);
  ObservationModel mdl;
  mdl.kind_ = ObservationKind::wideband_selection;
  mdl.a_ = CMatrix::Zero(pattern.n_p, pattern.n_c * pattern.n_t);
  for (Eigen::Index r = 0; r < pattern.n_p; ++r) {
    const auto& [c, t] = pattern.positions[static_cast<std::size_t>(r)];
    mdl.a_(r, c + pattern.n_c * t) = 1.0;
  }
  mdl.sigma2_ = sigma2;
  mdl.pattern_ = pattern;
  return mdl;
}

CVector observe(Rng& rng, const ObservationModel& model, const CVector& h) {
  require_dim(h.size() == model.n(), "observe: channel dimension does not match the model");
  CVector y = model.a() * h;
  if (model.sigma2() > 0.0) y += rng.complex_normal_vector(model.m(), model.sigma2());
  return y;
}

CMatrix observe_batch(Rng& rng, const ObservationModel& model, const CMatrix& h) {
  require_dim(h.rows() == model.n(), "observe_batch: channel dimension does not match the model");
  CMatrix y = model.a() * h;
  if (model.sigma2() > 0.0)
    for (Eigen::Index t = 0; t < y.cols(); ++t)
      y.col(t) += rng.complex_normal_vector(model.m(), model.sigma2());
  return y;
}

double sigma2_from_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }
double snr_db_from_sigma2(double sigma2) { return -10.0 * std::log10(sigma2); }

nlohmann::json to_json(const ObservationModel& model) {
  nlohmann::json j;
  j["kind"] = to_string(model.kind());
  j["sigma2"] = model.sigma2();
  switch (model.kind()) {
    case ObservationKind::simo_identity:
      j["n"] = model.n();
      break;
    case ObservationKind::mimo_pilot:
      if (model.custom_pilots())
        throw UnsupportedError("to_json: models with custom pilot matrices are not serializable");
      j["n_rx"] = model.n_rx();
      j["n_tx"] = model.n_tx();
      j["n_p"] = model.pilots().cols();
      break;
    case ObservationKind::wideband_selection: {
      const auto& p = model.pattern();
      j["layout"] = to_string(p.layout);
      j["n_c"] = p.n_c;
      j["n_t"] = p.n_t;
      j["n_p"] = p.n_p;
      auto pos = nlohmann::json::array();
      for (const auto& [c, t] : p.positions) pos.push_back({c, t});
      j["positions"] = pos;
      break;
    }
  }
  return j;
}

ObservationModel observation_model_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const double sigma2 = j.at("sigma2").get<double>();
  if (kind == "simo_identity") return simo_model(j.at("n").get<Eigen::Index>(), sigma2);
  if (kind == "mimo_pilot")
    return mimo_model(j.at("n_rx").get<Eigen::Index>(), j.at("n_tx").get<Eigen::Index>(),
                      j.at("n_p").get<Eigen::Index>(), sigma2);
  if (kind == "wideband_selection") {
    PilotPattern p;
    p.layout = pilot_layout_from_string(j.at("layout").get<std::string>());
    p.n_c = j.at("n_c").get<Eigen::Index>();
    p.n_t = j.at("n_t").get<Eigen::Index>();
    p.n_p = j.at("n_p").get<Eigen::Index>();
    for (const auto& e : j.at("positions"))
      p.positions.emplace_back(e.at(0).get<Eigen::Index>(), e.at(1).get<Eigen::Index>());
    return wideband_model(p, sigma2);
  }
  throw ConfigError("unknown observation model kind '" + kind + "'");
}

}  // namespace gmmest
