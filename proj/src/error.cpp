// Copyright 2026 The mvusim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvusim/error.hpp"

namespace mvusim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MalformedTensor: return "MalformedTensor";
    case ErrorCode::LaneMismatch: return "LaneMismatch";
    case ErrorCode::AddressOutOfRange: return "AddressOutOfRange";
    case ErrorCode::PrecisionMismatch: return "PrecisionMismatch";
    case ErrorCode::MvpOverflow: return "MvpOverflow";
    case ErrorCode::QuantOverflow: return "QuantOverflow";
    case ErrorCode::BadWindow: return "BadWindow";
    case ErrorCode::BadQuantWindow: return "BadQuantWindow";
    case ErrorCode::BadJob: return "BadJob";
    case ErrorCode::JobOverrun: return "JobOverrun";
    case ErrorCode::IllegalInstruction: return "IllegalInstruction";
    case ErrorCode::MisalignedAccess: return "MisalignedAccess";
    case ErrorCode::UnknownCsr: return "UnknownCsr";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::UndefinedLabel: return "UndefinedLabel";
    case ErrorCode::ProgramTooLarge: return "ProgramTooLarge";
    case ErrorCode::UnsupportedShape: return "UnsupportedShape";
    case ErrorCode::UnsupportedOp: return "UnsupportedOp";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::RamOverflow: return "RamOverflow";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Deadlock: return "Deadlock";
    case ErrorCode::Mismatch: return "Mismatch";
  }
  return "Unknown";
}

}  // namespace mvusim
