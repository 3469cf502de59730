// Copyright 2026 The casediag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "casediag/error.hpp"

namespace casediag {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::EmptyLabel: return "EmptyLabel";
    case Errc::InvalidEdge: return "InvalidEdge";
    case Errc::TooFewFacts: return "TooFewFacts";
    case Errc::SeedNotInGraph: return "SeedNotInGraph";
    case Errc::MaskNotSubset: return "MaskNotSubset";
    case Errc::EmptyText: return "EmptyText";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyNodeSet: return "EmptyNodeSet";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EmptyArmSet: return "EmptyArmSet";
    case Errc::HorizonExhausted: return "HorizonExhausted";
    case Errc::MalformedToken: return "MalformedToken";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::ResponseParseError: return "ResponseParseError";
    case Errc::WrongState: return "WrongState";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::InsufficientCorpus: return "InsufficientCorpus";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace casediag
