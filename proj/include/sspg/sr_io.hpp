#pragma once

// SR instance container:
//
//   bytes 0..7   magic "SSPGSR\0\0"
//   bytes 8..15  header length H, little-endian uint64
//   next H bytes JSON header {n, m, p, lambda, alpha, seed, format_version}
//   payload      T (m x n), Delta (p x n), y (m); row-major little-endian f64

#include "sspg/sr.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace sspg {

inline constexpr int kSRFormatVersion = 1;
inline constexpr std::array<char, 8> kSRMagic{'S', 'S', 'P', 'G', 'S', 'R', '\0', '\0'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> buf;
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf.data(), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), 8);
  if (!is) throw std::runtime_error("truncated SR container");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& os, double v) {
  put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline double get_f64(std::istream& is) {
  return std::bit_cast<double>(get_u64(is));
}

}  // namespace detail

inline void save_sr_instance(const SRProblem& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  const nlohmann::json header = {
      {"format_version", kSRFormatVersion},
      {"n", p.cols()},
      {"m", p.rows()},
      {"p", static_cast<std::size_t>(p.analysis.rows())},
      {"lambda", p.lambda},
      {"alpha", p.alpha},
      {"seed", p.seed},
  };
  const std::string text = header.dump();
  os.write(kSRMagic.data(), kSRMagic.size());
  detail::put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (Eigen::Index r = 0; r < p.dictionary.rows(); ++r)
    for (Eigen::Index c = 0; c < p.dictionary.cols(); ++c)
      detail::put_f64(os, p.dictionary(r, c));
  for (Eigen::Index r = 0; r < p.analysis.rows(); ++r)
    for (Eigen::Index c = 0; c < p.analysis.cols(); ++c)
      detail::put_f64(os, p.analysis(r, c));
  for (Eigen::Index r = 0; r < p.signal.size(); ++r)
    detail::put_f64(os, p.signal[r]);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline SRProblem load_sr_instance(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kSRMagic)
    throw std::runtime_error(path + ": not an SR instance container");
  const std::uint64_t len = detail::get_u64(is);
  if (len > (1u << 20)) throw std::runtime_error(path + ": header too large");
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error(path + ": truncated header");
  const auto header = nlohmann::json::parse(text);
  if (header.at("format_version").get<int>() != kSRFormatVersion)
    throw std::runtime_error(path + ": unsupported format_version");

  const auto n = header.at("n").get<Eigen::Index>();
  const auto m = header.at("m").get<Eigen::Index>();
  const auto rows_delta = header.at("p").get<Eigen::Index>();
  SRProblem p;
  p.lambda = header.at("lambda").get<double>();
  p.alpha = header.at("alpha").get<double>();
  p.seed = header.at("seed").get<std::uint64_t>();
  p.dictionary.resize(m, n);
  p.analysis.resize(rows_delta, n);
  p.signal.resize(m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < n; ++c) p.dictionary(r, c) = detail::get_f64(is);
  for (Eigen::Index r = 0; r < rows_delta; ++r)
    for (Eigen::Index c = 0; c < n; ++c) p.analysis(r, c) = detail::get_f64(is);
  for (Eigen::Index r = 0; r < m; ++r) p.signal[r] = detail::get_f64(is);
  p.validate();
  return p;
}

}  // namespace sspg
