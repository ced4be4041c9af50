#include "gmmest/dataset_io.hpp"

#include "gmmest/binary_io.hpp"

#include <cstdio>
#include <fstream>

namespace gmmest {

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
}

void write_dataset(std::ostream& out, const CMatrix& samples) {
  using namespace binio;
  put_magic(out, "GMMC");
  put_le<std::uint32_t>(out, kDatasetVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(samples.cols()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(samples.rows()));
  for (Eigen::Index m = 0; m < samples.cols(); ++m)
    for (Eigen::Index i = 0; i < samples.rows(); ++i) put_cplx(out, samples(i, m));
  if (!out) throw std::runtime_error("write_dataset: stream error");
}

CMatrix read_dataset(std::istream& in) {
  using namespace binio;
  expect_magic(in, "GMMC", "read_dataset");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kDatasetVersion)
    throw std::runtime_error("read_dataset: unsupported version " + std::to_string(version));
  const auto count = get_le<std::uint64_t>(in);
  const auto dim = get_le<std::uint32_t>(in);
  CMatrix samples(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  for (Eigen::Index m = 0; m < samples.cols(); ++m)
    for (Eigen::Index i = 0; i < samples.rows(); ++i) samples(i, m) = get_cplx(in);
  return samples;
}

void save_dataset(const std::string& path, const CMatrix& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(out, samples);
}

CMatrix load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_dataset(in);
}

void export_dataset_csv(std::ostream& out, const CMatrix& samples) {
  char buf[64];
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    out << (i ? "," : "") << "re_" << i << ",im_" << i;
  out << '\n';
  for (Eigen::Index m = 0; m < samples.cols(); ++m) {
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", samples(i, m).real(), samples(i, m).imag());
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace gmmest
