#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace sideband::out {

/// 17 significant digits; non-finite values become null.
std::string number(double v);
std::string quote(std::string_view s);
std::string array(std::span<const double> values);
std::string array(std::span<const std::uint64_t> values);

/// Insertion-ordered JSON object writer.
class JsonObject {
 public:
  JsonObject& add(std::string_view key, double v);
  JsonObject& add(std::string_view key, std::uint64_t v);
  JsonObject& add(std::string_view key, int v);
  JsonObject& add(std::string_view key, bool v);
  JsonObject& add(std::string_view key, std::string_view v);
  JsonObject& add(std::string_view key, const char* v) { return add(key, std::string_view(v)); }
  JsonObject& add_raw(std::string_view key, std::string_view json);

  std::string str() const { return body_ + "}"; }

 private:
  void key(std::string_view k);
  std::string body_ = "{";
};

}  // namespace sideband::out
