// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace longalign {

// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define LONGALIGN_DEFINE_ERROR(Name)          \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

LONGALIGN_DEFINE_ERROR(UnmappableCharacter);
LONGALIGN_DEFINE_ERROR(RangeError);
LONGALIGN_DEFINE_ERROR(ConfigError);
LONGALIGN_DEFINE_ERROR(DegenerateCorpus);
LONGALIGN_DEFINE_ERROR(FormatError);
LONGALIGN_DEFINE_ERROR(InvalidSegment);
LONGALIGN_DEFINE_ERROR(TooShortAudio);
LONGALIGN_DEFINE_ERROR(UnknownSymbol);
LONGALIGN_DEFINE_ERROR(EmptyWindow);
LONGALIGN_DEFINE_ERROR(SegmentOutOfRange);
LONGALIGN_DEFINE_ERROR(InconsistentInputs);
LONGALIGN_DEFINE_ERROR(MissingUpstream);
LONGALIGN_DEFINE_ERROR(CorruptCache);

#undef LONGALIGN_DEFINE_ERROR

// ARPA and other line-oriented parsers report the offending line.
class ParseError : public FormatError {
public:
    ParseError(std::size_t line, const std::string& what)
        : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace longalign
