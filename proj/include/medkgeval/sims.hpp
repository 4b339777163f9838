#pragma once

#include "medkgeval/gateway.hpp"

namespace medkgeval {

// Deterministic role simulators. Each one parses the structured marker lines
// the prompt templates render (INTENT:, FACTS:, METRIC:, ...) and produces a
// fixed reply, which makes full pipeline runs reproducible without any model.

class SimPatientBackend : public ChatBackend {
public:
    std::string complete(std::span<const ChatMessage> messages) override;
    std::string name() const override { return "sim-patient"; }
};

struct SimDoctorOptions {
    std::string claim = "unknown condition";  // named in FINAL DIAGNOSIS lines
    int claim_after = 0;   // claim once this many patient turns arrived; 0 = only on request
    bool thorough = true;  // echo the patient's facts and ask follow-ups
    bool never_claim = false;
};

class SimDoctorBackend : public ChatBackend {
public:
    explicit SimDoctorBackend(SimDoctorOptions options = {});
    std::string complete(std::span<const ChatMessage> messages) override;
    std::string name() const override { return "sim-doctor"; }

private:
    SimDoctorOptions options_;
};

// Lexical judge: counts reference mentions in the doctor's last line and maps
// the fraction onto the rubric.
class SimJudgeBackend : public ChatBackend {
public:
    std::string complete(std::span<const ChatMessage> messages) override;
    std::string name() const override { return "sim-judge"; }
};

// Extracts the text after "<prefix>" on the first line that starts with it.
std::optional<std::string> marker_line(const std::string& text, const std::string& prefix);

}  // namespace medkgeval
