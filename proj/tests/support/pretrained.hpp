// SPDX-License-Identifier: Apache-2.0
// The default-config pretrained ring8 model, trained once per build tree and
// cached on disk for the slow tests.
#pragma once

#include <filesystem>

#include "msdda/harness.hpp"

#ifndef MSDDA_TEST_CACHE_DIR
#define MSDDA_TEST_CACHE_DIR "msdda_test_cache"
#endif

namespace testing_support {

inline const msdda::EpsilonModel& default_pretrained() {
  static const msdda::EpsilonModel model = [] {
    const std::filesystem::path dir = MSDDA_TEST_CACHE_DIR;
    std::filesystem::create_directories(dir);
    return msdda::pretrained_model(msdda::default_config(), dir);
  }();
  return model;
}

}  // namespace testing_support
