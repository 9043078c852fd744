#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rstring/integrator.hpp"
#include "rstring/observables.hpp"

namespace rstring {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

class TruncationError : public IoError {
 public:
  using IoError::IoError;
};

inline constexpr std::uint16_t kTrajectoryFormatVersion = 1;

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class ByteWriter {
 public:
  ByteWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("io: cannot open '" + path + "' for writing");
  }

  void bytes(const void* p, std::size_t len) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
    if (!out_)
      throw IoError("io: write failed on '" + path_ + "' at byte offset " +
                    std::to_string(offset_));
    offset_ += len;
  }

  void u16(std::uint16_t v) { unsigned_le(v, 2); }
  void u32(std::uint32_t v) { unsigned_le(v, 4); }
  void u64(std::uint64_t v) { unsigned_le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void text(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

 private:
  void unsigned_le(std::uint64_t v, int n) {
    unsigned char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(buf, static_cast<std::size_t>(n));
  }

  std::string path_;
  std::ofstream out_;
  std::size_t offset_ = 0;
};

class ByteReader {
 public:
  ByteReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("io: cannot open '" + path + "' for reading");
  }

  void bytes(void* p, std::size_t len) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(len));
    if (static_cast<std::size_t>(in_.gcount()) != len)
      throw TruncationError("io: '" + path_ + "' truncated at byte offset " +
                            std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
    offset_ += len;
  }

  std::uint16_t u16() { return static_cast<std::uint16_t>(unsigned_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(unsigned_le(4)); }
  std::uint64_t u64() { return unsigned_le(8); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::string text() {
    const std::uint64_t len = u64();
    if (len > (1u << 20))
      throw FormatError("io: '" + path_ + "' descriptor length " + std::to_string(len) +
                        " is implausible at byte offset " + std::to_string(offset_));
    std::string s(len, '\0');
    if (len > 0) bytes(s.data(), len);
    return s;
  }

  bool exhausted() {
    in_.peek();
    return in_.eof();
  }

  std::size_t offset() const { return offset_; }

 private:
  std::uint64_t unsigned_le(int n) {
    unsigned char buf[8];
    bytes(buf, static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }

  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace detail

struct TrajectoryFileData {
  Trajectory trajectory;
  std::uint64_t seed = 0;
  std::string domain_descriptor;
  std::string potential_descriptor;
};

// the free-text header blob: the two descriptors plus the pinned endpoints,
// which the fixed-layout header does not carry
inline std::string pack_descriptors(const TrajectoryFileData& data) {
  std::ostringstream os;
  os << "domain " << data.domain_descriptor << '\n';
  os << "potential " << data.potential_descriptor << '\n';
  os << "a";
  for (int c = 0; c < data.trajectory.grid.dim; ++c)
    os << ' ' << detail::format_double(data.trajectory.grid.a(c));
  os << "\nb";
  for (int c = 0; c < data.trajectory.grid.dim; ++c)
    os << ' ' << detail::format_double(data.trajectory.grid.b(c));
  os << '\n';
  return os.str();
}

inline void write_trajectory(const TrajectoryFileData& data, const std::string& path) {
  const Trajectory& traj = data.trajectory;
  const Grid& grid = traj.grid;
  detail::ByteWriter w(path);
  w.bytes("RSTR", 4);
  w.u16(kTrajectoryFormatVersion);
  w.u16(static_cast<std::uint16_t>(grid.dim));
  w.u32(static_cast<std::uint32_t>(grid.m));
  w.u64(traj.states.size());
  w.f64(traj.dt);
  w.u32(static_cast<std::uint32_t>(traj.record_every));
  w.f64(traj.n);
  w.u64(data.seed);
  w.text(pack_descriptors(data));
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    w.f64(traj.times[i]);
    for (int j = 0; j < grid.m; ++j)
      for (int c = 0; c < grid.dim; ++c) w.f64(traj.states[i](j, c));
    for (int j = 0; j < grid.m; ++j)
      for (int c = 0; c < grid.dim; ++c) w.f64(traj.penalty[i](j, c));
  }
}

inline TrajectoryFileData read_trajectory(const std::string& path) {
  detail::ByteReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "RSTR", 4) != 0)
    throw FormatError("io: '" + path + "' does not start with the RSTR magic bytes");
  const std::uint16_t version = r.u16();
  if (version != kTrajectoryFormatVersion)
    throw VersionError("io: '" + path + "' has format version " + std::to_string(version) +
                       ", expected " + std::to_string(kTrajectoryFormatVersion));
  const int dim = r.u16();
  const int m = static_cast<int>(r.u32());
  const std::uint64_t records = r.u64();
  const double dt = r.f64();
  const int record_every = static_cast<int>(r.u32());
  const double n = r.f64();
  const std::uint64_t seed = r.u64();
  const std::string blob = r.text();

  std::string domain_desc, potential_desc;
  Vec a = Vec::Zero(dim), b = Vec::Zero(dim);
  bool saw_a = false, saw_b = false;
  std::istringstream lines(blob);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "domain") {
      domain_desc = line.substr(std::min(line.size(), key.size() + 1));
    } else if (key == "potential") {
      potential_desc = line.substr(std::min(line.size(), key.size() + 1));
    } else if (key == "a" || key == "b") {
      Vec& target = (key == "a") ? a : b;
      (key == "a" ? saw_a : saw_b) = true;
      for (int c = 0; c < dim; ++c)
        if (!(ls >> target(c)))
          throw FormatError("io: '" + path + "' endpoint line '" + line + "' is malformed");
    }
  }
  if (!saw_a || !saw_b)
    throw FormatError("io: '" + path + "' descriptor blob lacks the pinned endpoints");

  Trajectory traj{Grid(m, a, b), dt, record_every, n, {}, {}, {}, {}};
  traj.times.reserve(records);
  traj.states.reserve(records);
  traj.penalty.reserve(records);
  for (std::uint64_t i = 0; i < records; ++i) {
    traj.times.push_back(r.f64());
    PathState s(m, dim), p(m, dim);
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < dim; ++c) s(j, c) = r.f64();
    for (int j = 0; j < m; ++j)
      for (int c = 0; c < dim; ++c) p(j, c) = r.f64();
    traj.states.push_back(std::move(s));
    traj.penalty.push_back(std::move(p));
  }
  if (!r.exhausted())
    throw FormatError("io: '" + path + "' carries trailing bytes after frame " +
                      std::to_string(records) + " (offset " + std::to_string(r.offset()) + ")");
  return {std::move(traj), seed, std::move(domain_desc), std::move(potential_desc)};
}

// ---------------------------------------------------------------------------
// CSV exports

inline void export_frames_csv(const Trajectory& traj, std::ostream& os) {
  const Grid& grid = traj.grid;
  os << "time,theta,component,value,penalty\n";
  for (std::size_t i = 0; i < traj.states.size(); ++i)
    for (int j = 0; j < grid.m; ++j)
      for (int c = 0; c < grid.dim; ++c)
        os << detail::format_double(traj.times[i]) << ','
           << detail::format_double(grid.theta(j)) << ',' << c << ','
           << detail::format_double(traj.states[i](j, c)) << ','
           << detail::format_double(traj.penalty[i](j, c)) << '\n';
}

inline void export_contacts_csv(const std::vector<ContactRecord>& records,
                                const Grid& grid, std::ostream& os) {
  os << "time,cluster_count,positions\n";
  for (const ContactRecord& rec : records) {
    os << detail::format_double(rec.time) << ',' << rec.clusters.size() << ',';
    const auto pos = rec.cluster_positions(grid);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (i) os << ';';
      os << detail::format_double(pos[i]);
    }
    os << '\n';
  }
}

// weighted path samples, one row per node and component
inline void export_samples_csv(const Grid& grid, const std::vector<WeightedSample>& draws,
                               std::ostream& os) {
  os << "sample,theta,component,value,log_weight\n";
  for (std::size_t s = 0; s < draws.size(); ++s)
    for (int j = 0; j < grid.m; ++j)
      for (int c = 0; c < grid.dim; ++c)
        os << s << ',' << detail::format_double(grid.theta(j)) << ',' << c << ','
           << detail::format_double(draws[s].path(j, c)) << ','
           << detail::format_double(draws[s].log_weight) << '\n';
}

}  // namespace rstring
