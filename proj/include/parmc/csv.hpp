#ifndef PARMC_CSV_HPP
#define PARMC_CSV_HPP

#include <cstdint>
#include <string>

namespace parmc {

// Locale-independent shortest round-trip formatting, so emitted files are
// byte-stable across runs and thread counts.
std::string format_double(double x);
std::string format_u64(std::uint64_t x);

// Appends one CSV row from preformatted cells.
void append_row(std::string& out, std::initializer_list<std::string> cells);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace parmc

#endif
