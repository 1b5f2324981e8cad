#pragma once

#include <chrono>
#include <string>
#include <sys/types.h>
#include <vector>

namespace derivscope::detail {

/// A child process speaking line-delimited text over its stdin/stdout.
class ChildProcess {
 public:
  using Clock = std::chrono::steady_clock;

  /// Throws ConfigError when the program cannot be launched.
  explicit ChildProcess(const std::vector<std::string>& argv);
  ~ChildProcess();

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// False when the child has gone away.
  bool write_line(const std::string& line);

  enum class ReadStatus { Line, Timeout, Eof };
  ReadStatus read_line(std::string& line, Clock::time_point deadline);

  void kill();

 private:
  void reap(std::chrono::milliseconds grace);

  pid_t pid_ = -1;
  int in_fd_ = -1;   // child's stdin
  int out_fd_ = -1;  // child's stdout
  std::string buffer_;
};

}  // namespace derivscope::detail
