#include "noisyrank/journal.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <vector>

#include "noisyrank/errors.hpp"

namespace noisyrank {

namespace {

constexpr std::string_view kHeaderPrefix = "#noisyrank-journal v1 L=";

std::uint64_t parse_uint(std::string_view field, std::size_t line_no) {
  std::uint64_t value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw InputError("journal line " + std::to_string(line_no) + ": bad integer '" + std::string(field) + "'");
  }
  return value;
}

std::string format_record(const Measurement& m) {
  return std::to_string(m.sequence_number) + "," + std::to_string(m.lesser) + "," + std::to_string(m.greater) +
         "\n";
}

}  // namespace

std::string journal_header(std::size_t dimension) {
  return std::string(kHeaderPrefix) + std::to_string(dimension) + "\n";
}

std::string format_journal(const MeasurementLog& log) {
  std::string out = journal_header(log.dimension());
  for (const Measurement& m : log.records()) {
    out += format_record(m);
  }
  return out;
}

void write_journal(std::ostream& out, const MeasurementLog& log) { out << format_journal(log); }

MeasurementLog parse_journal(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      break;  // torn final line
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty() || !lines[0].starts_with(kHeaderPrefix)) {
    throw InputError("journal header missing; expected '" + std::string(kHeaderPrefix) + "<L>'");
  }
  const auto dimension = parse_uint(lines[0].substr(kHeaderPrefix.size()), 1);

  std::vector<Measurement> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = lines[i];
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw InputError("journal line " + std::to_string(i + 1) + ": expected seq,lesser,greater");
    }
    Measurement m;
    m.sequence_number = parse_uint(line.substr(0, c1), i + 1);
    m.lesser = static_cast<ElementId>(parse_uint(line.substr(c1 + 1, c2 - c1 - 1), i + 1));
    m.greater = static_cast<ElementId>(parse_uint(line.substr(c2 + 1), i + 1));
    records.push_back(m);
  }
  return MeasurementLog::from_records(dimension, records);
}

MeasurementLog read_journal(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_journal(text);
}

MeasurementLog load_journal(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open journal " + path.string());
  }
  return read_journal(in);
}

JournalWriter::JournalWriter(const std::filesystem::path& path, std::size_t dimension) : path_(path) {
  const bool exists = std::filesystem::exists(path);
  std::string existing;
  if (exists) {
    std::ifstream in(path, std::ios::binary);
    existing.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    const auto journal = parse_journal(existing);
    if (journal.dimension() != dimension) {
      throw InputError("journal " + path.string() + " has L=" + std::to_string(journal.dimension()) +
                       ", expected " + std::to_string(dimension));
    }
  }
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT, 0644);
  if (fd_ < 0) {
    throw std::runtime_error("cannot open journal " + path.string() + ": " + std::strerror(errno));
  }
  if (!exists) {
    write_all(journal_header(dimension));
  } else {
    const auto keep = existing.rfind('\n') + 1;
    if (keep != existing.size() && ::ftruncate(fd_, static_cast<off_t>(keep)) != 0) {
      throw std::runtime_error("cannot truncate torn journal tail: " + std::string(std::strerror(errno)));
    }
    ::lseek(fd_, static_cast<off_t>(keep), SEEK_SET);
  }
  ::fsync(fd_);
}

JournalWriter::~JournalWriter() {
  if (fd_ >= 0) {
    ::close(fd_);
  }
}

JournalWriter::JournalWriter(JournalWriter&& other) noexcept
    : path_(std::move(other.path_)), fd_(std::exchange(other.fd_, -1)) {}

JournalWriter& JournalWriter::operator=(JournalWriter&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) {
      ::close(fd_);
    }
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

void JournalWriter::append(const Measurement& m) {
  write_all(format_record(m));
  if (::fsync(fd_) != 0) {
    throw std::runtime_error("fsync failed on " + path_.string() + ": " + std::strerror(errno));
  }
}

void JournalWriter::write_all(std::string_view bytes) {
  while (!bytes.empty()) {
    const auto written = ::write(fd_, bytes.data(), bytes.size());
    if (written < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("journal write failed on " + path_.string() + ": " + std::strerror(errno));
    }
    bytes.remove_prefix(static_cast<std::size_t>(written));
  }
}

}  // namespace noisyrank
