#include "levicav/time_trace.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace levicav {

namespace {
constexpr char kMagic[9] = "LEVICAV1";

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
} // namespace

int TimeTrace::channel(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  throw domain_error("TimeTrace: no channel labeled '" + label + "'");
}

void save_trace(const TimeTrace& trace, const std::string& path) {
  trace.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("save_trace: cannot open " + path);
  os.write(kMagic, 8);
  write_pod(os, static_cast<std::uint32_t>(trace.n_channels()));
  for (const auto& label : trace.labels) {
    write_pod(os, static_cast<std::uint32_t>(label.size()));
    os.write(label.data(), static_cast<std::streamsize>(label.size()));
  }
  write_pod(os, trace.dt);
  write_pod(os, trace.seed);
  write_pod(os, static_cast<std::uint64_t>(trace.n_samples()));
  os.write(reinterpret_cast<const char*>(trace.samples.data()),
           static_cast<std::streamsize>(sizeof(double) * trace.samples.size()));
  if (!os) throw io_error("save_trace: write failed for " + path);
}

TimeTrace load_trace(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("load_trace: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw io_error("load_trace: bad magic in " + path);
  TimeTrace trace;
  const auto n_channels = read_pod<std::uint32_t>(is);
  trace.labels.resize(n_channels);
  for (auto& label : trace.labels) {
    const auto len = read_pod<std::uint32_t>(is);
    label.resize(len);
    is.read(label.data(), len);
  }
  trace.dt = read_pod<double>(is);
  trace.seed = read_pod<std::uint64_t>(is);
  const auto n_samples = read_pod<std::uint64_t>(is);
  trace.samples.resize(static_cast<Eigen::Index>(n_samples), n_channels);
  is.read(reinterpret_cast<char*>(trace.samples.data()),
          static_cast<std::streamsize>(sizeof(double) * trace.samples.size()));
  if (!is) throw io_error("load_trace: truncated file " + path);
  trace.validate();
  return trace;
}

void export_trace_csv(const TimeTrace& trace, const std::string& path) {
  trace.validate();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw io_error("export_trace_csv: cannot open " + path);
  std::fputs("time_s", f);
  for (const auto& label : trace.labels) std::fprintf(f, ",%s", label.c_str());
  std::fputc('\n', f);
  for (Eigen::Index i = 0; i < trace.n_samples(); ++i) {
    std::fprintf(f, "%.9g", trace.dt * static_cast<double>(i));
    for (Eigen::Index c = 0; c < trace.n_channels(); ++c)
      std::fprintf(f, ",%.9g", trace.samples(i, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

} // namespace levicav
