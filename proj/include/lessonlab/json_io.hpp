#pragma once

#include "json.hpp"

#include "lessonlab/notes.hpp"
#include "lessonlab/pitch.hpp"
#include "lessonlab/region.hpp"
#include "lessonlab/scoring.hpp"
#include "lessonlab/seg_eval.hpp"
#include "lessonlab/session.hpp"

namespace lessonlab {

using json = nlohmann::json;

double round_to(double value, int decimals);

void to_json(json& j, const Region& r);
void from_json(const json& j, Region& r);

void to_json(json& j, const ScoreReport& r);
void from_json(const json& j, ScoreReport& r);

void to_json(json& j, const PracticeCounters& c);
void from_json(const json& j, PracticeCounters& c);

void to_json(json& j, const SessionState& s);
void from_json(const json& j, SessionState& s);

/// {midi, onset, duration}, seconds to 3 decimals.
json notes_to_json(const NoteSequence& seq);
NoteSequence notes_from_json(const json& j, NoteSource source = NoteSource::Reference);

/// Parallel arrays {times, midi}, nulls where unvoiced, 4 decimals.
json curve_to_json(const MelodyCurve& curve);
MelodyCurve curve_from_json(const json& j);

/// Parallel arrays {times, f0, confidence}, nulls where unvoiced, 4 decimals.
json contour_to_json(const PitchContour& contour);
PitchContour contour_from_json(const json& j);

json summary_to_json(const ProgressionSummary& s);

json eval_report_to_json(const EvalReport& report);

/// Regions as [{start, end}] seconds; the ground-truth label format.
std::vector<Region> regions_from_label_json(const json& j, Track track = Track::Instrument);
json regions_to_label_json(const std::vector<Region>& regions);

} // namespace lessonlab
