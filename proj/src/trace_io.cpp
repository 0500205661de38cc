#include "qoco/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qoco {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trace_csv_header(int d, int k) {
  std::string h = "t";
  for (int i = 1; i <= d; ++i) h += ",x_" + std::to_string(i);
  h += ",cost";
  for (int i = 1; i <= k; ++i) h += ",g_" + std::to_string(i);
  for (int i = 1; i <= k; ++i) h += ",Q_" + std::to_string(i);
  h += ",eta,grad_norm";
  return h;
}

void write_trace_csv(const PolicyTrace& trace, std::ostream& out) {
  if (trace.empty()) throw ConfigError("cannot write an empty trace");
  const auto d = trace.front().action.size();
  const auto k = trace.front().constraint_values.size();
  out << trace_csv_header(static_cast<int>(d), static_cast<int>(k)) << '\n';
  std::string row;
  for (const TraceRecord& rec : trace) {
    if (rec.action.size() != d || rec.constraint_values.size() != k || rec.queue_vector.size() != k) {
      throw DimensionError("trace row " + std::to_string(rec.t) + " has inconsistent widths");
    }
    row = std::to_string(rec.t);
    for (Eigen::Index i = 0; i < d; ++i) row += ',' + format_double(rec.action[i]);
    row += ',' + format_double(rec.cost_value);
    for (Eigen::Index i = 0; i < k; ++i) row += ',' + format_double(rec.constraint_values[i]);
    for (Eigen::Index i = 0; i < k; ++i) row += ',' + format_double(rec.queue_vector[i]);
    row += ',' + format_double(rec.step_size);
    row += ',' + format_double(rec.surrogate_grad_norm);
    out << row << '\n';
  }
}

std::string trace_csv(const PolicyTrace& trace) {
  std::ostringstream out;
  write_trace_csv(trace, out);
  return out.str();
}

void emit_traces(const PolicyTrace& trace, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error("cannot create directory for " + path.string() + ": " + ec.message());
  const std::string bytes = trace_csv(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace qoco
