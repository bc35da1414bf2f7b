#pragma once

#include <optional>
#include <string>

#include "floydwalk/error.hpp"

namespace testutil {

// Runs fn and reports the taxonomy kind of the Error it throws, if any.
template <typename F>
std::optional<floydwalk::ErrKind> thrown_kind(F&& fn) {
  try {
    fn();
  } catch (const floydwalk::Error& e) {
    return e.kind();
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

template <typename F>
std::string thrown_message(F&& fn) {
  try {
    fn();
  } catch (const floydwalk::Error& e) {
    return e.what();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace testutil
