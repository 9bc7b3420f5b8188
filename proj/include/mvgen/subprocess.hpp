#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mvgen {

struct SpawnOptions {
  bool pipe_stdin = false;
  bool pipe_stdout = false;
};

/// Child process with optional stdin/stdout pipes. stderr is always captured
/// into an anonymous temp file so a chatty child can never block on it.
class Subprocess {
 public:
  Subprocess(const std::vector<std::string>& argv, SpawnOptions options);
  ~Subprocess();

  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  /// Reads until `buffer` is full or stdout hits EOF; returns the byte count.
  std::size_t read_stdout(std::span<std::byte> buffer);

  /// Returns false when the child closed its end (EPIPE).
  bool write_stdin(std::span<const std::byte> data);
  void close_stdin();

  /// Waits for exit and returns the exit status (128 + signal on signal).
  int wait();

  std::string stderr_text() const;

 private:
  int pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  int stderr_fd_ = -1;
  bool waited_ = false;
  int status_ = 0;
};

/// Resolves an executable: paths containing '/' are checked directly,
/// bare names are searched on PATH. Returns an empty string when absent.
std::string find_executable(const std::string& name);

}  // namespace mvgen
