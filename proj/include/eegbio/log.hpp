#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace eegbio::log {

using Sink = std::function<void(const std::string&)>;

namespace detail {
inline std::mutex& mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return s;
}
}  // namespace detail

/// Replaces the warning sink and returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard lock(detail::mutex());
  return std::exchange(detail::sink(), std::move(s));
}

inline void warn(const std::string& msg) {
  std::lock_guard lock(detail::mutex());
  if (detail::sink()) detail::sink()(msg);
}

/// Collects warnings for the lifetime of the guard (tests, quiet CLI runs).
class Capture {
 public:
  Capture() {
    previous_ = set_sink([this](const std::string& m) { messages_.push_back(m); });
  }
  ~Capture() { set_sink(std::move(previous_)); }
  Capture(const Capture&) = delete;
  Capture& operator=(const Capture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  Sink previous_;
  std::vector<std::string> messages_;
};

}  // namespace eegbio::log
