#pragma once

#include <memory>
#include <optional>
#include <string>

#include "lessonlab/config.hpp"

namespace lessonlab {

enum class JobStatus { Queued, Running, Done, Failed };

std::string_view to_string(JobStatus s);

struct PreprocessJob {
    std::string job_id;
    JobStatus status = JobStatus::Queued;
    double progress = 0.0;
    std::optional<std::string> error;
    std::optional<std::string> result;
};

/// HTTP service over the lesson storage root. Lessons live in
/// storage_root/lessons/<id>, sessions in storage_root/sessions.
class LessonServer {
public:
    explicit LessonServer(AppConfig config);
    ~LessonServer();

    LessonServer(const LessonServer&) = delete;
    LessonServer& operator=(const LessonServer&) = delete;

    /// Binds to the configured address; port 0 picks a free port. Returns
    /// the bound port. Throws Io when the address is unavailable.
    int bind();
    /// Serves until stop(). Requires bind().
    void serve();
    /// bind() plus serve() on a background thread; returns once ready.
    int start();
    void stop();

    int port() const;
    std::optional<PreprocessJob> job(const std::string& job_id) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace lessonlab
