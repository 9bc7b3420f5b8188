#include "mvgen/subprocess.hpp"

#include "mvgen/error.hpp"

#include <cerrno>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace mvgen {
namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

bool is_executable_file(const std::string& path) {
  struct stat st {};
  return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(path.c_str(), X_OK) == 0;
}

}  // namespace

std::string find_executable(const std::string& name) {
  if (name.empty()) return {};
  if (name.find('/') != std::string::npos) return is_executable_file(name) ? name : std::string{};
  const char* path = std::getenv("PATH");
  if (!path) return {};
  std::string dirs(path);
  std::size_t start = 0;
  while (start <= dirs.size()) {
    const auto end = dirs.find(':', start);
    std::string dir = dirs.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (dir.empty()) dir = ".";
    const std::string candidate = dir + "/" + name;
    if (is_executable_file(candidate)) return candidate;
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return {};
}

Subprocess::Subprocess(const std::vector<std::string>& argv, SpawnOptions options) {
  if (argv.empty()) throw Error(Errc::InvalidArgument, "empty argv");
  ignore_sigpipe_once();

  int in_pipe[2] = {-1, -1};
  int out_pipe[2] = {-1, -1};
  if (options.pipe_stdin && ::pipe2(in_pipe, O_CLOEXEC) != 0)
    throw Error(Errc::Io, std::string("pipe: ") + std::strerror(errno));
  if (options.pipe_stdout && ::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw Error(Errc::Io, std::string("pipe: ") + std::strerror(errno));

  std::FILE* err_file = std::tmpfile();
  if (!err_file) throw Error(Errc::Io, "cannot create stderr capture file");
  stderr_fd_ = ::dup(::fileno(err_file));
  std::fclose(err_file);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  if (options.pipe_stdin) {
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  } else {
    posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  }
  if (options.pipe_stdout) {
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  } else {
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  }
  posix_spawn_file_actions_adddup2(&actions, stderr_fd_, STDERR_FILENO);

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const int rc = ::posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);

  if (options.pipe_stdin) ::close(in_pipe[0]);
  if (options.pipe_stdout) ::close(out_pipe[1]);
  stdin_fd_ = in_pipe[1];
  stdout_fd_ = out_pipe[0];

  if (rc != 0) {
    if (stdin_fd_ >= 0) ::close(stdin_fd_);
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
    ::close(stderr_fd_);
    stdin_fd_ = stdout_fd_ = stderr_fd_ = -1;
    pid_ = -1;
    throw Error(rc == ENOENT || rc == EACCES ? Errc::CodecToolMissing : Errc::Io,
                "cannot spawn " + argv[0] + ": " + std::strerror(rc));
  }
}

Subprocess::~Subprocess() {
  close_stdin();
  if (stdout_fd_ >= 0) ::close(stdout_fd_);
  stdout_fd_ = -1;
  if (pid_ > 0 && !waited_) {
    ::kill(pid_, SIGTERM);
    wait();
  }
  if (stderr_fd_ >= 0) ::close(stderr_fd_);
}

std::size_t Subprocess::read_stdout(std::span<std::byte> buffer) {
  if (stdout_fd_ < 0) return 0;
  std::size_t total = 0;
  while (total < buffer.size()) {
    const auto n = ::read(stdout_fd_, buffer.data() + total, buffer.size() - total);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::Io, std::string("read: ") + std::strerror(errno));
    }
    if (n == 0) break;
    total += static_cast<std::size_t>(n);
  }
  return total;
}

bool Subprocess::write_stdin(std::span<const std::byte> data) {
  if (stdin_fd_ < 0) return false;
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(stdin_fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE) return false;
      throw Error(Errc::Io, std::string("write: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

void Subprocess::close_stdin() {
  if (stdin_fd_ >= 0) ::close(stdin_fd_);
  stdin_fd_ = -1;
}

int Subprocess::wait() {
  if (waited_ || pid_ <= 0) return status_;
  close_stdin();
  // Drain stdout so a child blocked on a full pipe can exit.
  if (stdout_fd_ >= 0) {
    std::byte sink[65536];
    while (true) {
      const auto n = ::read(stdout_fd_, sink, sizeof sink);
      if (n > 0) continue;
      if (n < 0 && errno == EINTR) continue;
      break;
    }
    ::close(stdout_fd_);
    stdout_fd_ = -1;
  }
  int raw = 0;
  while (::waitpid(pid_, &raw, 0) < 0) {
    if (errno != EINTR) break;
  }
  waited_ = true;
  if (WIFEXITED(raw)) status_ = WEXITSTATUS(raw);
  else if (WIFSIGNALED(raw)) status_ = 128 + WTERMSIG(raw);
  return status_;
}

std::string Subprocess::stderr_text() const {
  if (stderr_fd_ < 0) return {};
  std::string text;
  char buf[4096];
  off_t offset = 0;
  while (true) {
    const auto n = ::pread(stderr_fd_, buf, sizeof buf, offset);
    if (n <= 0) break;
    text.append(buf, static_cast<std::size_t>(n));
    offset += n;
  }
  return text;
}

}  // namespace mvgen
