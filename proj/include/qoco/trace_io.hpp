#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>

#include "qoco/core.hpp"

namespace qoco {

// Shortest round-trip decimal form of v.
std::string format_double(double v);

// Header: t,x_1..x_d,cost,g_1..g_k,Q_1..Q_k,eta,grad_norm
std::string trace_csv_header(int d, int k);
void write_trace_csv(const PolicyTrace& trace, std::ostream& out);
std::string trace_csv(const PolicyTrace& trace);

// Writes the CSV to path, creating parent directories. Throws Error naming
// the path on failure.
void emit_traces(const PolicyTrace& trace, const std::filesystem::path& path);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex_digest(std::uint64_t digest);

}  // namespace qoco
