/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#ifndef PTSHADOW_IO_HPP
#define PTSHADOW_IO_HPP

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptshadow/fcs.hpp"
#include "ptshadow/mle.hpp"
#include "ptshadow/shadows.hpp"

namespace ptshadow::io {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

inline constexpr std::uint32_t kFormatVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("read_pod: truncated stream");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("read_string: truncated stream");
  return s;
}

inline void write_magic(std::ostream& os, const char (&m)[5]) {
  os.write(m, 4);
  write_pod<std::uint32_t>(os, kFormatVersion);
}

inline void expect_magic(std::istream& is, const char (&m)[5]) {
  char got[4];
  is.read(got, 4);
  if (!is || std::string(got, 4) != std::string(m, 4))
    throw std::runtime_error("expect_magic: wrong container type");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kFormatVersion)
    throw std::runtime_error("expect_magic: unsupported format version " +
                             std::to_string(version));
}

/// Dense complex matrix block: rows, cols, then row-major complex128 pairs.
inline void write_matrix(std::ostream& os, const Matrix& m) {
  write_pod<std::int64_t>(os, m.rows());
  write_pod<std::int64_t>(os, m.cols());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) {
      write_pod<double>(os, m(r, c).real());
      write_pod<double>(os, m(r, c).imag());
    }
}

inline Matrix read_matrix(std::istream& is) {
  const auto rows = read_pod<std::int64_t>(is);
  const auto cols = read_pod<std::int64_t>(is);
  if (rows < 0 || cols < 0 || rows * cols > (std::int64_t{1} << 28))
    throw std::runtime_error("read_matrix: implausible dimensions");
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const double re = read_pod<double>(is);
      const double im = read_pod<double>(is);
      m(r, c) = Complex(re, im);
    }
  return m;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return is;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Process tensors

inline void save_process(const std::string& path, const ProcessTensor& pt) {
  auto os = detail::open_out(path);
  detail::write_magic(os, "PTPT");
  detail::write_pod<std::int64_t>(os, pt.steps);
  detail::write_pod<std::int64_t>(os, pt.local_dim);
  const auto labels = process_leg_labels(pt.steps);
  detail::write_pod<std::uint32_t>(os,
                                   static_cast<std::uint32_t>(labels.size()));
  for (const auto& l : labels) detail::write_string(os, l);
  detail::write_matrix(os, pt.choi);
}

inline ProcessTensor load_process(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "PTPT");
  const auto k = detail::read_pod<std::int64_t>(is);
  const auto d = detail::read_pod<std::int64_t>(is);
  const auto nlabels = detail::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nlabels; ++i) detail::read_string(is);
  return ProcessTensor(detail::read_matrix(is), k, d);
}

inline nlohmann::json process_to_json(const ProcessTensor& pt) {
  nlohmann::json j;
  j["steps"] = pt.steps;
  j["local_dim"] = pt.local_dim;
  j["legs"] = process_leg_labels(pt.steps);
  nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
  for (Index r = 0; r < pt.choi.rows(); ++r) {
    nlohmann::json rr = nlohmann::json::array(), ri = nlohmann::json::array();
    for (Index c = 0; c < pt.choi.cols(); ++c) {
      rr.push_back(pt.choi(r, c).real());
      ri.push_back(pt.choi(r, c).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ri));
  }
  j["choi_re"] = std::move(re);
  j["choi_im"] = std::move(im);
  return j;
}

inline ProcessTensor process_from_json(const nlohmann::json& j) {
  const Index k = j.at("steps").get<Index>();
  const Index d = j.at("local_dim").get<Index>();
  const auto& re = j.at("choi_re");
  const auto& im = j.at("choi_im");
  const Index dim = static_cast<Index>(re.size());
  Matrix m(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c)
      m(r, c) = Complex(re[static_cast<std::size_t>(r)]
                          [static_cast<std::size_t>(c)].get<double>(),
                        im[static_cast<std::size_t>(r)]
                          [static_cast<std::size_t>(c)].get<double>());
  return ProcessTensor(m, k, d);
}

// ---------------------------------------------------------------------------
// Shadow record files

/// Compact outcome records: header (frame id, k, local dim, per-slot element
/// counts, shot count, seed) followed by fixed-width index tuples. The frame
/// itself is reattached at load time and validated against the header.
inline void save_shadow_records(const std::string& path,
                                const ShadowSet& shadow) {
  auto os = detail::open_out(path);
  detail::write_magic(os, "PTSR");
  detail::write_string(os, shadow.frame.id);
  const Index k = shadow.frame.num_steps();
  detail::write_pod<std::int64_t>(os, k);
  detail::write_pod<std::int64_t>(os, shadow.frame.local_dim);
  for (const auto& sf : shadow.frame.steps)
    detail::write_pod<std::uint16_t>(
        os, static_cast<std::uint16_t>(sf.elements.size()));
  detail::write_pod<std::uint16_t>(
      os, static_cast<std::uint16_t>(shadow.frame.terminal.effects.size()));
  detail::write_pod<std::uint64_t>(os, shadow.snapshots.size());
  detail::write_pod<std::uint64_t>(os, shadow.seed);
  for (const auto& s : shadow.snapshots) {
    for (std::uint16_t e : s.element) detail::write_pod<std::uint16_t>(os, e);
    detail::write_pod<std::uint16_t>(os, s.terminal);
  }
}

inline ShadowSet load_shadow_records(const std::string& path,
                                     const InstrumentFrame& frame) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "PTSR");
  const std::string id = detail::read_string(is);
  const auto k = detail::read_pod<std::int64_t>(is);
  const auto d = detail::read_pod<std::int64_t>(is);
  if (id != frame.id || k != frame.num_steps() || d != frame.local_dim)
    throw std::runtime_error(
        "load_shadow_records: record file does not match the frame");
  for (Index j = 0; j < k; ++j) {
    const auto n = detail::read_pod<std::uint16_t>(is);
    if (n != frame.steps[static_cast<std::size_t>(j)].elements.size())
      throw std::runtime_error(
          "load_shadow_records: slot element count mismatch");
  }
  if (detail::read_pod<std::uint16_t>(is) != frame.terminal.effects.size())
    throw std::runtime_error(
        "load_shadow_records: terminal effect count mismatch");
  const auto n = detail::read_pod<std::uint64_t>(is);
  const auto seed = detail::read_pod<std::uint64_t>(is);
  ShadowSet out;
  out.frame = frame;
  out.seed = seed;
  out.snapshots.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    Snapshot s;
    s.element.resize(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j)
      s.element[static_cast<std::size_t>(j)] =
          detail::read_pod<std::uint16_t>(is);
    s.terminal = detail::read_pod<std::uint16_t>(is);
    out.snapshots.push_back(std::move(s));
  }
  return out;
}

/// Human-readable debug dump: one JSON object per line per snapshot.
inline void save_shadow_jsonl(const std::string& path,
                              const ShadowSet& shadow) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& s : shadow.snapshots) {
    nlohmann::json j;
    j["e"] = s.element;
    j["t"] = s.terminal;
    os << j.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// Matrix-product operators

inline void save_mpo(const std::string& path, const MpoProcess& mpo) {
  auto os = detail::open_out(path);
  detail::write_magic(os, "PTMP");
  detail::write_pod<std::int64_t>(os, mpo.steps);
  detail::write_pod<std::int64_t>(os, mpo.local_dim);
  detail::write_pod<std::int64_t>(os, mpo.window);
  detail::write_pod<std::uint32_t>(
      os, static_cast<std::uint32_t>(mpo.bond_dims.size()));
  for (Index b : mpo.bond_dims) detail::write_pod<std::int64_t>(os, b);
  detail::write_pod<std::uint32_t>(
      os, static_cast<std::uint32_t>(mpo.junctions.size()));
  for (const auto& rep : mpo.junctions) {
    detail::write_pod<std::int64_t>(os, rep.rank);
    detail::write_pod<double>(os, rep.smallest);
    detail::write_pod<double>(os, rep.largest);
  }
  detail::write_pod<std::uint32_t>(os,
                                   static_cast<std::uint32_t>(mpo.cores.size()));
  for (const auto& c : mpo.cores) detail::write_matrix(os, c);
}

inline MpoProcess load_mpo(const std::string& path) {
  auto is = detail::open_in(path);
  detail::expect_magic(is, "PTMP");
  MpoProcess mpo;
  mpo.steps = detail::read_pod<std::int64_t>(is);
  mpo.local_dim = detail::read_pod<std::int64_t>(is);
  mpo.window = detail::read_pod<std::int64_t>(is);
  const auto nb = detail::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nb; ++i)
    mpo.bond_dims.push_back(detail::read_pod<std::int64_t>(is));
  const auto nj = detail::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nj; ++i) {
    SvReport rep;
    rep.rank = detail::read_pod<std::int64_t>(is);
    rep.smallest = detail::read_pod<double>(is);
    rep.largest = detail::read_pod<double>(is);
    mpo.junctions.push_back(rep);
  }
  const auto nc = detail::read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < nc; ++i)
    mpo.cores.push_back(detail::read_matrix(is));
  if (static_cast<Index>(mpo.cores.size()) != mpo.num_legs())
    throw std::runtime_error("load_mpo: core count mismatch");
  return mpo;
}

inline nlohmann::json mpo_summary(const MpoProcess& mpo) {
  nlohmann::json j;
  j["steps"] = mpo.steps;
  j["local_dim"] = mpo.local_dim;
  j["window"] = mpo.window;
  j["bond_dims"] = mpo.bond_dims;
  nlohmann::json junc = nlohmann::json::array();
  for (const auto& rep : mpo.junctions)
    junc.push_back({{"rank", rep.rank},
                    {"smallest", rep.smallest},
                    {"largest", rep.largest}});
  j["junctions"] = std::move(junc);
  return j;
}

// ---------------------------------------------------------------------------
// Frame manifests and fit logs

inline nlohmann::json frame_manifest(const InstrumentFrame& frame) {
  nlohmann::json j;
  j["id"] = frame.id;
  j["local_dim"] = frame.local_dim;
  j["steps"] = nlohmann::json::array();
  for (const auto& sf : frame.steps) {
    Matrix stacked(static_cast<Index>(sf.elements.size()),
                   frame.local_dim * frame.local_dim * frame.local_dim *
                       frame.local_dim);
    for (std::size_t e = 0; e < sf.elements.size(); ++e)
      stacked.row(static_cast<Index>(e)) =
          std::sqrt(sf.element_weight(e)) *
          vec_row(sf.elements[e].matrix).transpose();
    const SvReport rep = singular_value_report(stacked);
    j["steps"].push_back({{"elements", sf.elements.size()},
                          {"settings", sf.num_settings()},
                          {"rank", rep.rank},
                          {"smallest_sv", rep.smallest},
                          {"largest_sv", rep.largest}});
  }
  j["terminal_effects"] = frame.terminal.effects.size();
  return j;
}

inline nlohmann::json fit_log(const MleResult& res) {
  nlohmann::json j;
  j["converged"] = res.converged;
  j["log_likelihood"] = res.log_likelihood;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& it : res.trace)
    trace.push_back({{"iter", it.iter}, {"f", it.f}, {"step", it.step}});
  j["trace"] = std::move(trace);
  return j;
}

// ---------------------------------------------------------------------------
// Checksums

/// FNV-1a 64-bit hash of a byte buffer.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(s.data(), s.size());
}

inline std::uint64_t checksum_file(const std::string& path) {
  auto is = detail::open_in(path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace ptshadow::io

#endif  // PTSHADOW_IO_HPP
