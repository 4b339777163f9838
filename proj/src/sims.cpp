#include "medkgeval/sims.hpp"

#include <algorithm>
#include <sstream>

#include "medkgeval/agents.hpp"
#include "medkgeval/rubric.hpp"

namespace medkgeval {

std::optional<std::string> marker_line(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) == 0) {
            return trim(line.substr(prefix.size()));
        }
    }
    return std::nullopt;
}

namespace {

std::vector<std::string> split_facts(const std::string& joined) {
    std::vector<std::string> out;
    for (const std::string& part : split(joined, ';')) {
        std::string name = trim(part);
        if (!name.empty() && name != "none") out.push_back(name);
    }
    return out;
}

std::string style_prefix(const std::string& style) {
    if (style == "anxious") return "I'm quite worried. ";
    if (style == "verbose") return "Well, let me lay it all out. ";
    return "";
}

std::string fact_list(const std::vector<std::string>& names) {
    return join(names, ", ");
}

}  // namespace

std::string SimPatientBackend::complete(std::span<const ChatMessage> messages) {
    validate_messages(messages);
    const std::string& system = messages.front().role == "system" ? messages.front().content : "";
    const std::string& user = messages.back().content;

    std::string intent = marker_line(user, "INTENT:").value_or("");
    std::string style = marker_line(system, "STYLE:").value_or("");
    std::string round_kind = marker_line(user, "ROUND_KIND:").value_or("none");
    std::string guidance = marker_line(user, "GUIDANCE:").value_or("none");
    std::vector<std::string> facts = split_facts(marker_line(user, "FACTS:").value_or("none"));
    std::vector<std::string> known =
        split_facts(marker_line(user, "KNOWN_FACTS:").value_or("none"));
    int turn = 1;
    if (auto t = marker_line(user, "TURN:")) {
        try {
            turn = std::stoi(*t);
        } catch (const std::exception&) {
        }
    }

    std::string body;
    if (intent == "reveal_attribute") {
        if (round_kind == "indication") {
            body = "I was told I have " + fact_list(facts) +
                   ". Would this medication help with that?";
        } else if (round_kind == "contraindication") {
            body = "I should mention I also have " + fact_list(facts) +
                   ". Can I still take it?";
        } else if (round_kind == "precaution") {
            body = "Given " + fact_list(facts) +
                   ", is there anything I should watch for while taking it?";
        } else {
            body = "I already take " + fact_list(facts) +
                   ". Will they clash with this medication?";
        }
    } else if (intent == "disclose_symptoms") {
        body = "I've developed " + fact_list(facts) + ".";
        if (guidance != "none") body += " For the " + facts.front() + ", " + guidance + ".";
    } else if (intent == "answer_doctor_query") {
        body = "You asked about " + fact_list(facts) + ": yes, " +
               (guidance == "none" ? "I have noticed that" : guidance) + ".";
    } else if (intent == "request_diagnosis") {
        body = "Doctor, putting it together: " + fact_list(facts) +
               ". What is your diagnosis?";
    } else if (intent == "single_turn") {
        body = "Doctor, here is the full picture: I have " + fact_list(facts) +
               ". What is my diagnosis?";
    } else if (intent == "ablated") {
        if (turn % 2 == 1 && !known.empty()) {
            body = "Lately I've had " + known.front() + ".";
        } else {
            body = "I just feel unwell, doctor; it's hard to put into words.";
        }
    } else if (intent == "ablated_request") {
        body = "Doctor, what do you think is wrong with me?";
    } else {
        body = "I'm not sure what to say.";
    }
    return style_prefix(style) + body;
}

SimDoctorBackend::SimDoctorBackend(SimDoctorOptions options) : options_(std::move(options)) {}

std::string SimDoctorBackend::complete(std::span<const ChatMessage> messages) {
    validate_messages(messages);
    const std::string& system = messages.front().role == "system" ? messages.front().content : "";
    bool diagnosis_task = system.find("TASK: disease_diagnosis") != std::string::npos;
    int patient_turns = 0;
    for (const ChatMessage& message : messages) {
        if (message.role == "user") ++patient_turns;
    }
    const std::string& last = messages.back().content;

    if (diagnosis_task && !options_.never_claim) {
        bool asked = contains_normalized(last, "diagnosis") ||
                     last.find("\xe8\xaf\x8a\xe6\x96\xad") != std::string::npos;
        bool due = options_.claim_after > 0 && patient_turns >= options_.claim_after;
        if (asked || due) {
            return "Based on what you have told me, here is my conclusion.\nFINAL DIAGNOSIS: " +
                   options_.claim;
        }
    }
    if (!options_.thorough) {
        return diagnosis_task ? "I see. Please go on." : "This medication is generally safe.";
    }
    if (diagnosis_task) {
        return "Thank you for telling me. You mentioned: " + last +
               " Could you say more about how it started, and anything else you have noticed?";
    }
    return "Here is what I can tell you about that. You raised: " + last +
           " Each of those points matches the official guidance for this medication, so let me "
           "go through them: " + last;
}

std::string SimJudgeBackend::complete(std::span<const ChatMessage> messages) {
    validate_messages(messages);
    const std::string& user = messages[messages.front().role == "system" ? 1 : 0].content;

    std::string metric_token = marker_line(user, "METRIC:").value_or("");
    Metric metric = parse_metric(metric_token);

    // REFERENCE block: the line after the "REFERENCE" heading.
    std::vector<std::string> reference;
    std::string doctor_line;
    {
        std::istringstream in(user);
        std::string line;
        bool in_reference = false;
        bool in_doctor = false;
        while (std::getline(in, line)) {
            if (line == "REFERENCE") {
                in_reference = true;
                continue;
            }
            if (in_reference) {
                reference = split_facts(line);
                in_reference = false;
            }
            // Doctor turns can span lines; capture until the next speaker
            // or the blank line closing the dialogue block.
            if (line.rfind("doctor: ", 0) == 0) {
                doctor_line = line.substr(8);
                in_doctor = true;
            } else if (line.empty() || line.rfind("patient: ", 0) == 0) {
                in_doctor = false;
            } else if (in_doctor) {
                doctor_line += "\n" + line;
            }
        }
    }

    size_t mentioned = 0;
    for (const std::string& name : reference) {
        if (contains_normalized(doctor_line, name)) ++mentioned;
    }
    double fraction = reference.empty()
                          ? 0.0
                          : static_cast<double>(mentioned) / static_cast<double>(reference.size());

    int raw = 0;
    if (metric == Metric::DrugCorrectness || metric == Metric::DrugComprehensiveness) {
        raw = fraction >= 1.0 ? 2 : (fraction > 0.0 ? 1 : 0);
    } else if (metric == Metric::HistoryTaking) {
        bool asks = has_question_mark(doctor_line);
        raw = asks ? (mentioned > 0 ? 2 : 1) : 0;
    } else {
        std::string reference_name = reference.empty() ? "" : reference.front();
        std::optional<std::string> claim = detect_diagnosis_claim(doctor_line);
        if (claim && !reference_name.empty()) {
            std::string a = normalize_for_match(*claim);
            std::string b = normalize_for_match(reference_name);
            if (a == b || a.find(b) != std::string::npos || b.find(a) != std::string::npos) {
                raw = 3;
            } else {
                size_t shared = 0;
                for (const std::string& word : split(a, ' ')) {
                    if (word.size() > 2 && (" " + b + " ").find(" " + word + " ") !=
                                               std::string::npos) {
                        ++shared;
                    }
                }
                raw = shared > 0 ? 1 : 0;
            }
        } else if (!reference_name.empty() && contains_normalized(doctor_line, reference_name)) {
            raw = 2;
        }
    }

    std::ostringstream out;
    out << "SCORE: " << raw << "\nRATIONALE: matched " << mentioned << " of " << reference.size()
        << " reference facts in the doctor's reply.";
    return out.str();
}

}  // namespace medkgeval
