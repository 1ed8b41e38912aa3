#pragma once

// Small helpers shared by the test suites (not reference math; see oracles.hpp
// for that).

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "predict/errors.hpp"

namespace testutil {

// Runs fn and reports which ErrorCode it threw; 0 means "did not throw".
inline int thrown_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const predict::Error& e) {
    return static_cast<int>(e.code());
  }
  return 0;
}

inline std::string thrown_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const predict::Error& e) {
    return e.what();
  }
  return {};
}

// Exact elementwise equality for Eigen types (operator== is not defined there).
template <typename A, typename B>
bool bitwise_equal(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return (a.array() == b.array()).all();
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace testutil
