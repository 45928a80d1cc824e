#pragma once

// HTTP front end for a Session. Requests are served concurrently; depth
// edits are queued as jobs and handled by one worker thread, which folds
// every job queued so far into a single resimulation.

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>

#include "lsim/report.hpp"
#include "lsim/session.hpp"

namespace lsim {

enum class JobState { Pending, Done, Failed };

struct Job {
  int id = 0;
  std::map<int, FifoDepth> depths;
  JobState state = JobState::Pending;
  std::string report;  // serialized AnalysisReport once done
  std::string error;
};

class Server {
 public:
  explicit Server(Session& session) : session_(session) {
    routes();
    worker_ = std::thread([this] { work(); });
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ~Server() {
    stop();
    {
      std::lock_guard lock(mu_);
      quit_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  /// Binds to `port` (0 picks a free one) and serves on a background thread.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    int bound = port == 0 ? http_.bind_to_any_port(host) : (http_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    listener_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return bound;
  }

  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port) {
    if (!http_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    http_.stop();
    if (listener_.joinable()) listener_.join();
  }

  /// Number of resimulations the worker has run.
  int batches() const {
    std::lock_guard lock(mu_);
    return batches_;
  }

  /// Blocks until no job is pending.
  void drain() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && !busy_; });
  }

 private:
  static void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(2) + "\n", "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
  }

  bool require_done(httplib::Response& res) {
    if (session_.done()) return true;
    send_error(res, 409, "analysis not finished (stage " + std::string(to_string(session_.status().stage)) + ")");
    return false;
  }

  json job_json(const Job& j) const {
    json out = {{"id", j.id}};
    switch (j.state) {
      case JobState::Pending: out["status"] = "pending"; break;
      case JobState::Done:
        out["status"] = "done";
        out["report"] = json::parse(j.report);
        break;
      case JobState::Failed:
        out["status"] = "error";
        out["error"] = j.error;
        break;
    }
    return out;
  }

  void routes() {
    http_.Get("/status", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, to_json(session_.status()));
    });

    http_.Get("/report", [this](const httplib::Request&, httplib::Response& res) {
      if (!require_done(res)) return;
      res.status = 200;
      res.set_content(serialize_report(session_.report()), "application/json");
    });

    http_.Get("/fifos", [this](const httplib::Request&, httplib::Response& res) {
      if (!require_done(res)) return;
      send_json(res, 200, fifo_table_json(session_.report()));
    });

    http_.Post("/fifos/depths", [this](const httplib::Request& req, httplib::Response& res) {
      if (!require_done(res)) return;
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_error(res, 400, std::string("malformed JSON: ") + e.what());
      }
      if (!body.is_object()) return send_error(res, 400, "expected an object mapping fifo id to depth");
      std::map<int, FifoDepth> depths;
      for (const auto& [key, val] : body.items()) {
        int id = 0;
        try {
          id = parse_id_key(key, "request");
        } catch (const ParseError&) {
          return send_error(res, 404, "unknown fifo '" + key + "'");
        }
        if (!session_.design().fifo(id)) return send_error(res, 404, "unknown fifo " + key);
        auto d = depth_from_json(val);
        if (!d) return send_error(res, 400, "fifo " + key + ": depth must be an integer >= 1 or \"unbounded\"");
        depths[id] = *d;
      }
      Job job;
      {
        std::lock_guard lock(mu_);
        job.id = next_id_++;
        job.depths = std::move(depths);
        jobs_[job.id] = job;
        queue_.push_back(job.id);
      }
      cv_.notify_one();
      send_json(res, 202, job_json(job));
    });

    http_.Get(R"(/jobs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      int id = std::stoi(req.matches[1].str());
      std::lock_guard lock(mu_);
      auto it = jobs_.find(id);
      if (it == jobs_.end()) return send_error(res, 404, "unknown job " + std::to_string(id));
      send_json(res, 200, job_json(it->second));
    });
  }

  // Takes every queued job, applies their edits in submission order (later
  // edits to the same fifo win) and runs one resimulation for all of them.
  void work() {
    for (;;) {
      std::vector<int> batch;
      std::map<int, FifoDepth> merged;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return quit_ || !queue_.empty(); });
        if (quit_) return;
        while (!queue_.empty()) {
          int id = queue_.front();
          queue_.pop_front();
          batch.push_back(id);
          for (const auto& [f, d] : jobs_[id].depths) merged[f] = d;
        }
        busy_ = true;
      }
      std::string report, error;
      try {
        report = serialize_report(session_.apply_depths(merged));
      } catch (const std::exception& e) {
        error = e.what();
      }
      {
        std::lock_guard lock(mu_);
        ++batches_;
        for (int id : batch) {
          Job& j = jobs_[id];
          j.state = error.empty() ? JobState::Done : JobState::Failed;
          j.report = report;
          j.error = error;
        }
        busy_ = false;
      }
      idle_cv_.notify_all();
    }
  }

  Session& session_;
  httplib::Server http_;
  std::thread listener_;
  std::thread worker_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<int> queue_;
  std::map<int, Job> jobs_;
  int next_id_ = 1;
  int batches_ = 0;
  bool busy_ = false;
  bool quit_ = false;
};

}  // namespace lsim
