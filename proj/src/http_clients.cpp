#include "httplib.h"
#include "rag/gateway.hpp"

namespace rag {

nlohmann::json chat_request_body(const ModelRequest& request, const std::string& model) {
  nlohmann::json body;
  body["model"] = model;
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;
  body["messages"] = nlohmann::json::array();
  for (const auto& t : request.turns)
    body["messages"].push_back({{"role", std::string(to_string(t.role))}, {"content", t.content}});
  return body;
}

std::string parse_chat_response(const nlohmann::json& body) {
  try {
    const auto& choices = body.at("choices");
    if (choices.empty()) throw Error(ErrorCode::transport, "chat response has no choices");
    return choices.at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::transport, std::string("malformed chat response: ") + e.what());
  }
}

std::vector<std::vector<double>> parse_embedding_response(const nlohmann::json& body, std::size_t expected) {
  std::vector<std::vector<double>> out;
  try {
    for (const auto& item : body.at("data")) out.push_back(item.at("embedding").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::transport, std::string("malformed embedding response: ") + e.what());
  }
  if (out.size() != expected)
    throw Error(ErrorCode::transport, "embedding response has " + std::to_string(out.size()) + " vectors, expected " +
                                          std::to_string(expected));
  return out;
}

std::vector<double> parse_rerank_response(const nlohmann::json& body, std::size_t expected) {
  std::vector<double> scores;
  try {
    scores = body.at("scores").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::transport, std::string("malformed rerank response: ") + e.what());
  }
  if (scores.size() != expected)
    throw Error(ErrorCode::transport, "rerank response has " + std::to_string(scores.size()) + " scores, expected " +
                                          std::to_string(expected));
  return scores;
}

namespace {

nlohmann::json post_json(const HttpEndpoint& ep, const nlohmann::json& body) {
  httplib::Client client(ep.base_url);
  if (!client.is_valid()) throw Error(ErrorCode::invalid_argument, "invalid endpoint URL: " + ep.base_url);
  client.set_connection_timeout(ep.timeout_s, 0);
  client.set_read_timeout(ep.timeout_s, 0);
  client.set_write_timeout(ep.timeout_s, 0);
  httplib::Headers headers;
  if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);

  auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::transport, ep.base_url + ep.path + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorCode::transport, ep.base_url + ep.path + ": HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::transport, ep.base_url + ep.path + ": invalid JSON body: " + e.what());
  }
}

}  // namespace

std::string HttpChatBackend::send(const ModelRequest& request) {
  return parse_chat_response(post_json(endpoint_, chat_request_body(request, endpoint_.model)));
}

std::vector<std::vector<double>> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  nlohmann::json body{{"input", texts}};
  if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
  return parse_embedding_response(post_json(endpoint_, body), texts.size());
}

std::vector<double> HttpRerankBackend::score(const std::string& query, const std::vector<std::string>& documents) {
  nlohmann::json body{{"query", query}, {"documents", documents}};
  if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
  return parse_rerank_response(post_json(endpoint_, body), documents.size());
}

}  // namespace rag
