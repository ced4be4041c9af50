#include "gmmest/binary_io.hpp"
#include "gmmest/gmm.hpp"

#include <fstream>

namespace gmmest {

namespace {

constexpr std::uint32_t kGmmVersion = 1;

std::uint32_t structure_tag(CovStructure s) {
  switch (s) {
    case CovStructure::full: return 0;
    case CovStructure::circulant: return 1;
    case CovStructure::kronecker: return 2;
  }
  return 0;
}

}  // namespace

void write_gmm(std::ostream& out, const Gmm& gmm) {
  using namespace binio;
  const Eigen::Index k = gmm.components();
  const Eigen::Index n = gmm.dim();
  put_magic(out, "GMMP");
  put_le<std::uint32_t>(out, kGmmVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(k));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
  put_le<std::uint32_t>(out, structure_tag(gmm.structure));
  for (Eigen::Index i = 0; i < k; ++i) put_f64(out, gmm.weights(i));
  for (const auto& mu : gmm.means)
    for (Eigen::Index i = 0; i < n; ++i) put_cplx(out, mu(i));
  switch (gmm.structure) {
    case CovStructure::full:
      for (const auto& c : gmm.covs)
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index i = 0; i < n; ++i) put_cplx(out, c(i, j));
      break;
    case CovStructure::circulant:
      for (const auto& s : gmm.spectra)
        for (Eigen::Index i = 0; i < n; ++i) put_f64(out, s(i));
      break;
    case CovStructure::kronecker:
      write_gmm(out, *gmm.tx);
      write_gmm(out, *gmm.rx);
      break;
  }
  if (!out) throw std::runtime_error("write_gmm: stream error");
}

Gmm read_gmm(std::istream& in) {
  using namespace binio;
  expect_magic(in, "GMMP", "read_gmm");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kGmmVersion)
    throw std::runtime_error("read_gmm: unsupported version " + std::to_string(version));
  const Eigen::Index k = get_le<std::uint32_t>(in);
  const Eigen::Index n = get_le<std::uint32_t>(in);
  const auto tag = get_le<std::uint32_t>(in);
  RVector weights(k);
  for (Eigen::Index i = 0; i < k; ++i) weights(i) = get_f64(in);
  std::vector<CVector> means(static_cast<std::size_t>(k), CVector(n));
  for (auto& mu : means)
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = get_cplx(in);
  switch (tag) {
    case 0: {
      std::vector<CMatrix> covs(static_cast<std::size_t>(k), CMatrix(n, n));
      for (auto& c : covs)
        for (Eigen::Index j = 0; j < n; ++j)
          for (Eigen::Index i = 0; i < n; ++i) c(i, j) = get_cplx(in);
      return Gmm::full(std::move(weights), std::move(means), std::move(covs));
    }
    case 1: {
      std::vector<RVector> spectra(static_cast<std::size_t>(k), RVector(n));
      for (auto& s : spectra)
        for (Eigen::Index i = 0; i < n; ++i) s(i) = get_f64(in);
      return Gmm::circulant(std::move(weights), std::move(means), std::move(spectra));
    }
    case 2: {
      Gmm g;
      g.structure = CovStructure::kronecker;
      g.weights = std::move(weights);
      g.means = std::move(means);
      auto tx = std::make_shared<const Gmm>(read_gmm(in));
      auto rx = std::make_shared<const Gmm>(read_gmm(in));
      if (tx->components() * rx->components() != k || tx->dim() * rx->dim() != n)
        throw std::runtime_error("read_gmm: Kronecker factors do not match header");
      for (Eigen::Index i = 0; i < tx->components(); ++i)
        for (Eigen::Index j = 0; j < rx->components(); ++j)
          g.covs.push_back(kron(tx->covs[i], rx->covs[j]));
      g.tx = std::move(tx);
      g.rx = std::move(rx);
      return g;
    }
    default:
      throw std::runtime_error("read_gmm: unknown structure tag " + std::to_string(tag));
  }
}

void save_gmm(const std::string& path, const Gmm& gmm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_gmm(out, gmm);
}

Gmm load_gmm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_gmm(in);
}

}  // namespace gmmest
