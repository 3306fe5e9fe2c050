#include "tikzlab/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "tikzlab/error.hpp"

extern char** environ;

namespace tikzlab::proc {

namespace {

using Clock = std::chrono::steady_clock;

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  }
  int read_end() const { return fds[0]; }
  int write_end() const { return fds[1]; }
};

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

bool is_executable(const std::filesystem::path& p) {
  struct stat st {};
  return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
}

std::string joined_search_path() {
  std::string out;
  for (const auto& dir : search_path()) {
    if (!out.empty()) out.push_back(':');
    out += dir.string();
  }
  return out;
}

// Environment block for children: the parent's, with PATH replaced by search_path().
std::vector<std::string> child_environment() {
  std::vector<std::string> env;
  for (char** e = environ; e && *e; ++e) {
    if (std::strncmp(*e, "PATH=", 5) == 0) continue;
    env.emplace_back(*e);
  }
  env.push_back("PATH=" + joined_search_path());
  return env;
}

std::vector<char*> as_cstrings(std::vector<std::string>& v) {
  std::vector<char*> out;
  out.reserve(v.size() + 1);
  for (auto& s : v) out.push_back(s.data());
  out.push_back(nullptr);
  return out;
}

std::filesystem::path resolve_or_throw(const std::string& name) {
  auto exe = find_executable(name);
  if (!exe) throw Error("executable not found: " + name);
  return *exe;
}

struct Spawned {
  pid_t pid;
  int in_fd;
  int out_fd;
  int err_fd;
};

Spawned spawn(const std::vector<std::string>& argv, const std::filesystem::path& cwd,
              bool capture_err) {
  if (argv.empty()) throw InvalidArgument("empty command");
  const auto exe = resolve_or_throw(argv[0]);
  std::vector<std::string> args = argv;
  std::vector<std::string> env = child_environment();
  auto c_args = as_cstrings(args);
  auto c_env = as_cstrings(env);
  std::string exe_str = exe.string();
  std::string cwd_str = cwd.string();

  Pipe in, out, err;
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in.read_end(), STDIN_FILENO);
    ::dup2(out.write_end(), STDOUT_FILENO);
    if (capture_err) {
      ::dup2(err.write_end(), STDERR_FILENO);
    } else {
      const int devnull = ::open("/dev/null", O_WRONLY);
      if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
    }
    if (!cwd_str.empty() && ::chdir(cwd_str.c_str()) != 0) ::_exit(127);
    ::execve(exe_str.c_str(), c_args.data(), c_env.data());
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(in.read_end());
  ::close(out.write_end());
  ::close(err.write_end());
  if (!capture_err) ::close(err.read_end());
  return {pid, in.write_end(), out.read_end(), capture_err ? err.read_end() : -1};
}

int wait_exit_code(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return -1;
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return -1;
}

}  // namespace

std::vector<std::string> split_command(std::string_view cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  char quote = 0;
  for (char c : cmd) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur.push_back(c);
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      have = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (have) out.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur.push_back(c);
      have = true;
    }
  }
  if (have) out.push_back(std::move(cur));
  return out;
}

std::vector<std::filesystem::path> search_path() {
  std::vector<std::filesystem::path> dirs;
  auto append = [&](const char* var) {
    const char* v = std::getenv(var);
    if (!v) return;
    std::string_view s(v);
    std::size_t start = 0;
    while (start <= s.size()) {
      const auto colon = s.find(':', start);
      const auto part = s.substr(start, colon == std::string_view::npos ? s.npos : colon - start);
      if (!part.empty()) dirs.emplace_back(part);
      if (colon == std::string_view::npos) break;
      start = colon + 1;
    }
  };
  append("TIKZLAB_TEXBIN");
  append("PATH");
  return dirs;
}

std::optional<std::filesystem::path> find_executable(std::string_view name) {
  if (name.empty()) return std::nullopt;
  if (name.find('/') != std::string_view::npos) {
    std::filesystem::path p(name);
    if (is_executable(p)) return std::filesystem::absolute(p);
    return std::nullopt;
  }
  for (const auto& dir : search_path()) {
    auto candidate = dir / name;
    if (is_executable(candidate)) return candidate;
  }
  return std::nullopt;
}

RunResult run(const std::vector<std::string>& argv, const RunOptions& options) {
  const auto start = Clock::now();
  Spawned child = spawn(argv, options.cwd, /*capture_err=*/true);
  RunResult result;

  std::size_t written = 0;
  if (options.stdin_data.empty()) close_fd(child.in_fd);
  else ::fcntl(child.in_fd, F_SETFL, O_NONBLOCK);

  std::optional<Clock::time_point> deadline;
  if (options.timeout) {
    deadline = start + std::chrono::duration_cast<Clock::duration>(*options.timeout);
  }

  char buf[65536];
  while (child.out_fd >= 0 || child.err_fd >= 0) {
    std::vector<pollfd> fds;
    if (child.out_fd >= 0) fds.push_back({child.out_fd, POLLIN, 0});
    if (child.err_fd >= 0) fds.push_back({child.err_fd, POLLIN, 0});
    if (child.in_fd >= 0) fds.push_back({child.in_fd, POLLOUT, 0});
    int wait_ms = -1;
    if (deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
      if (left.count() <= 0) {
        result.timed_out = true;
        break;
      }
      wait_ms = static_cast<int>(left.count());
    }
    const int rc = ::poll(fds.data(), fds.size(), wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    for (const auto& p : fds) {
      if (!p.revents) continue;
      if (p.fd == child.in_fd) {
        const auto n = ::write(child.in_fd, options.stdin_data.data() + written,
                               options.stdin_data.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        if (n < 0 && errno != EAGAIN) close_fd(child.in_fd);
        if (written == options.stdin_data.size()) close_fd(child.in_fd);
        continue;
      }
      const auto n = ::read(p.fd, buf, sizeof buf);
      const bool is_out = p.fd == child.out_fd;
      if (n > 0) {
        (is_out ? result.out : result.err).append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EINTR && errno != EAGAIN)) {
        close_fd(is_out ? child.out_fd : child.err_fd);
      }
    }
  }
  if (result.timed_out) ::kill(-child.pid, SIGKILL);
  close_fd(child.in_fd);
  close_fd(child.out_fd);
  close_fd(child.err_fd);
  result.exit_code = wait_exit_code(child.pid);
  if (result.timed_out) ::kill(-child.pid, SIGKILL);
  result.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return result;
}

LineProcess::LineProcess(const std::vector<std::string>& argv) {
  // A dead reader must surface as a write error, not kill the toolkit.
  ::signal(SIGPIPE, SIG_IGN);
  Spawned child = spawn(argv, {}, /*capture_err=*/false);
  pid_ = child.pid;
  in_fd_ = child.in_fd;
  out_fd_ = child.out_fd;
}

LineProcess::~LineProcess() {
  close_fd(in_fd_);
  close_fd(out_fd_);
  if (pid_ > 0) {
    // Give the child a moment to exit on EOF, then make sure it is gone.
    for (int k = 0; k < 50; ++k) {
      int status = 0;
      const pid_t r = ::waitpid(pid_, &status, WNOHANG);
      if (r == pid_ || r < 0) {
        pid_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(-pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

void LineProcess::write_line(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::write(in_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write to child failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineProcess::read_line(std::chrono::duration<double> timeout) {
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(timeout);
  char buf[65536];
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (out_fd_ < 0) return std::nullopt;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd p{out_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) return std::nullopt;
    const auto n = ::read(out_fd_, buf, sizeof buf);
    if (n <= 0) {
      close_fd(out_fd_);
      continue;
    }
    buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

bool LineProcess::alive() {
  if (pid_ <= 0) return false;
  int status = 0;
  return ::waitpid(pid_, &status, WNOHANG) == 0;
}

}  // namespace tikzlab::proc
