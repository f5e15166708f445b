// Copyright 2026 The skilltune Authors
// SPDX-License-Identifier: Apache-2.0

#include "skilltune/error.hpp"

namespace skilltune {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kIoFailure: return "IoFailure";
    case ErrorKind::kMissingBody: return "MissingBody";
    case ErrorKind::kMalformedFrontMatter: return "MalformedFrontMatter";
    case ErrorKind::kIllegalResourcePath: return "IllegalResourcePath";
    case ErrorKind::kTransportError: return "TransportError";
    case ErrorKind::kMalformedResponse: return "MalformedResponse";
    case ErrorKind::kScriptExhausted: return "ScriptExhausted";
    case ErrorKind::kUnknownModel: return "UnknownModel";
    case ErrorKind::kUnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorKind::kMissingOutputArtifact: return "MissingOutputArtifact";
    case ErrorKind::kUnreadableArtifact: return "UnreadableArtifact";
    case ErrorKind::kPoolTooSmall: return "PoolTooSmall";
    case ErrorKind::kNotEnoughFailures: return "NotEnoughFailures";
    case ErrorKind::kProviderFailure: return "ProviderFailure";
    case ErrorKind::kWorkspaceSetupFailure: return "WorkspaceSetupFailure";
    case ErrorKind::kMissingBaseline: return "MissingBaseline";
    case ErrorKind::kEmptyDiagnosis: return "EmptyDiagnosis";
    case ErrorKind::kBatchDiagnosisFailure: return "BatchDiagnosisFailure";
    case ErrorKind::kSchemaViolation: return "SchemaViolation";
    case ErrorKind::kUnparseablePatch: return "UnparseablePatch";
    case ErrorKind::kDeleteOfMissingResource: return "DeleteOfMissingResource";
    case ErrorKind::kResultInvalid: return "ResultInvalid";
    case ErrorKind::kCorruptRunDir: return "CorruptRunDir";
    case ErrorKind::kMissingArtifacts: return "MissingArtifacts";
    case ErrorKind::kRunLocked: return "RunLocked";
  }
  return "Unknown";
}

}  // namespace skilltune
