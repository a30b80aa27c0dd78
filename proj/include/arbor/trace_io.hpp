// Copyright 2026 The Arbor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "arbor/controller.hpp"
#include "arbor/workload.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace arbor {

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A trace line could not be parsed. Carries the 1-based line number.
class ParseError : public IoError {
public:
    ParseError(const std::string& what, std::size_t line) : IoError(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

std::string event_to_json(const TraceEvent& event);
/// `line` is only used in diagnostics.
TraceEvent event_from_json(std::string_view text, std::size_t line = 0);

void write_trace(std::ostream& out, const EpisodeTrace& trace);
/// Blank lines are skipped. Throws ParseError on the first malformed line.
EpisodeTrace read_trace(std::istream& in);

void write_trace_file(const std::string& path, const EpisodeTrace& trace);
EpisodeTrace read_trace_file(const std::string& path);

std::string ground_truth_to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(std::string_view text);

void write_audit(std::ostream& out, const std::vector<AuditRecord>& audit);
std::vector<AuditRecord> read_audit(std::istream& in);

void write_series(std::ostream& out, const std::vector<MemorySample>& series);

} // namespace arbor
