#pragma once

// The `fds` command line: strip-sweep, fit2d, analyze, metrics, make-texture.

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fds::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kDivergence = 4 };

/// Bad flags, ranges or config content.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Settable keys shared by config files and `--key value` flags. Values are
/// applied as defaults, then the config file, then explicit flags.
class OptionTable {
 public:
  using Setter = std::function<void(const std::string&)>;
  using Getter = std::function<std::string()>;

  void add(const std::string& key, const std::string& help, Setter set, Getter get);

  /// `key = value` lines; blank lines and `#` comments are skipped. Unknown
  /// keys and malformed lines raise UsageError; unreadable files IoError.
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  [[nodiscard]] bool has(const std::string& key) const;

  /// Single `# fds <command> key=value ...` line with every effective value.
  [[nodiscard]] std::string stamp(const std::string& command) const;

  struct Entry {
    std::string key, help;
    Setter set;
    Getter get;
  };
  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

/// Runs the CLI with the given arguments (argv[0] is the program name) and
/// returns the process exit code. Diagnostics go to stderr.
int run(const std::vector<std::string>& args);

}  // namespace fds::cli
