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

#ifndef QGE_ERROR_H_
#define QGE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace qge {

enum class ErrorCode {
  kInvalidAttribution,
  kShapeError,
  kInvalidMask,
  kInvalidGrouping,
  kUnsupportedExplainer,
  kRefuseExhaustive,
  kInvalidM,
  kInvalidK,
  kDegenerateCorrelation,
  kAllNonPositive,
  kDegenerateMask,
  kInsufficientData,
  kNeedTwoMethods,
  kInvalidComponent,
  kEmptyDataset,
  kDivergedTraining,
  kGenerationFailed,
  kInvalidPatch,
  kLoadError,
  kConfigError,
  kInvalidArgument,
};

std::string_view ErrorCodeName(ErrorCode code);

// All library failures are reported through this exception type; `code()`
// identifies the failure class so callers (and the CLI exit-code mapping) can
// branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qge

#endif  // QGE_ERROR_H_
