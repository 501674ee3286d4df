/*
 * Copyright 2026 The QGE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef QGE_SRC_PARALLEL_H_
#define QGE_SRC_PARALLEL_H_

#include <exception>
#include <mutex>

#include <omp.h>

namespace qge::internal {

// Collects the first exception thrown inside a parallel region. Exceptions
// must not escape an OpenMP structured block.
class ExceptionSlot {
 public:
  template <typename F>
  void Run(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void Rethrow() {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
};

inline int ResolveThreads(int threads) {
  return threads > 0 ? threads : omp_get_max_threads();
}

}  // namespace qge::internal

#endif  // QGE_SRC_PARALLEL_H_
