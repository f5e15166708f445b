// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skilltune {

enum class ErrorKind {
  kInvalidArgument,
  kIoFailure,
  // skill package
  kMissingBody,
  kMalformedFrontMatter,
  kIllegalResourcePath,
  // provider
  kTransportError,
  kMalformedResponse,
  kScriptExhausted,
  kUnknownModel,
  kUnboundPlaceholder,
  // tasks
  kMissingOutputArtifact,
  kUnreadableArtifact,
  kPoolTooSmall,
  kNotEnoughFailures,
  // execution
  kProviderFailure,
  kWorkspaceSetupFailure,
  kMissingBaseline,
  // diagnosis
  kEmptyDiagnosis,
  kBatchDiagnosisFailure,
  // momentum / patcher
  kSchemaViolation,
  kUnparseablePatch,
  kDeleteOfMissingResource,
  kResultInvalid,
  // optimizer / analytics / cli
  kCorruptRunDir,
  kMissingArtifacts,
  kRunLocked,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the engine carries a kind so callers can route
/// degraded behavior (skip item, identity patch) without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace skilltune
