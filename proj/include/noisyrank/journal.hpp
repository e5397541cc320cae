#pragma once

// Text journal of judgements:
//
//   #noisyrank-journal v1 L=<L>
//   <seq>,<lesser>,<greater>
//   ...
//
// Decimal integers, LF line endings. A final line without its LF is a torn
// write from a crash and is dropped on load.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "noisyrank/core_model.hpp"

namespace noisyrank {

std::string journal_header(std::size_t dimension);

std::string format_journal(const MeasurementLog& log);
void write_journal(std::ostream& out, const MeasurementLog& log);

/// Throws InputError on a bad header, malformed line, or sequence gap.
MeasurementLog parse_journal(std::string_view text);
MeasurementLog read_journal(std::istream& in);
MeasurementLog load_journal(const std::filesystem::path& path);

/// Durable appender: each record is written and fsynced before append()
/// returns. Creates the file with its header if it does not exist, and
/// truncates a torn trailing line if one is found.
class JournalWriter {
 public:
  JournalWriter(const std::filesystem::path& path, std::size_t dimension);
  ~JournalWriter();

  JournalWriter(const JournalWriter&) = delete;
  JournalWriter& operator=(const JournalWriter&) = delete;
  JournalWriter(JournalWriter&& other) noexcept;
  JournalWriter& operator=(JournalWriter&& other) noexcept;

  void append(const Measurement& m);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void write_all(std::string_view bytes);

  std::filesystem::path path_;
  int fd_ = -1;
};

}  // namespace noisyrank
