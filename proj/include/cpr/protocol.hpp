#pragma once

// Wire protocol v1 between the toolkit and an out-of-process repair model.
//
//   hello    -> {"hello":{"protocol":1}}
//   hello    <- {"hello":{"protocol":1,"name":"<str>"}}
//   request  -> {"id":"<str>","code_tokens":[...],"comment_tokens":[...],"beam":<int>}
//   response <- {"id":"<str>","candidates":[{"tokens":[...],"score":<float>}]}
//   failure  <- {"id":"<str>","error":"<msg>"}
//
// Over stdio each message is one line of UTF-8 JSON. Over HTTP the request
// body is POSTed to /v1/repair and the hello is a GET of /v1/hello.

#include <string>

#include "json.hpp"

#include "cpr/error.hpp"
#include "cpr/program.hpp"

namespace cpr::protocol {

inline constexpr int kVersion = 1;

using nlohmann::json;

inline json hello_request() { return json{{"hello", {{"protocol", kVersion}}}}; }

inline json hello_response(const std::string& name) {
  return json{{"hello", {{"protocol", kVersion}, {"name", name}}}};
}

/// Returns the model name announced in a hello reply.
inline std::string parse_hello(const json& reply) {
  if (!reply.is_object() || !reply.contains("hello") || !reply["hello"].is_object())
    throw TransportError("malformed hello reply: " + reply.dump());
  const auto& h = reply["hello"];
  if (!h.contains("protocol") || h["protocol"] != kVersion)
    throw TransportError("unsupported protocol in hello reply: " + reply.dump());
  if (!h.contains("name") || !h["name"].is_string())
    throw TransportError("hello reply without name: " + reply.dump());
  return h["name"].get<std::string>();
}

inline json request(const std::string& id, const ProgramInput& input,
                    std::size_t beam) {
  return json{{"id", id},
              {"code_tokens", input.code.texts()},
              {"comment_tokens", input.comment.texts()},
              {"beam", beam}};
}

inline json response(const std::string& id, const RepairOutput& out) {
  json cands = json::array();
  for (const auto& c : out.candidates())
    cands.push_back({{"tokens", c.tokens.texts()}, {"score", c.model_score}});
  return json{{"id", id}, {"candidates", cands}};
}

inline RepairOutput parse_response(const json& reply, const std::string& expected_id) {
  if (!reply.is_object()) throw TransportError("response is not an object");
  if (!reply.contains("id") || !reply["id"].is_string())
    throw TransportError("response without id: " + reply.dump());
  if (reply["id"] != expected_id)
    throw TransportError("response id mismatch: expected " + expected_id + ", got " +
                         reply["id"].get<std::string>());
  if (reply.contains("error"))
    throw TransportError("model error: " + reply["error"].dump());
  if (!reply.contains("candidates") || !reply["candidates"].is_array())
    throw TransportError("response without candidates: " + reply.dump());
  std::vector<RepairCandidate> cands;
  for (const auto& c : reply["candidates"]) {
    if (!c.is_object() || !c.contains("tokens") || !c["tokens"].is_array() ||
        !c.contains("score") || !c["score"].is_number())
      throw TransportError("malformed candidate: " + c.dump());
    cands.push_back(RepairCandidate{
        code_sequence(c["tokens"].get<std::vector<std::string>>()),
        c["score"].get<double>()});
  }
  try {
    return RepairOutput::from_candidates(std::move(cands));
  } catch (const ValidationError& e) {
    throw TransportError(std::string("invalid candidates: ") + e.what());
  }
}

inline json parse_line(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed JSON from model: ") + e.what());
  }
}

}  // namespace cpr::protocol
