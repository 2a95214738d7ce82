#pragma once

#include <gtest/gtest.h>

#include "pmols/errors.hpp"

/// Runs fn and expects a pmols::Error of the given kind.
template <typename Fn>
void expect_error(pmols::ErrorKind kind, Fn&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected error " << pmols::to_string(kind);
  } catch (const pmols::Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}
