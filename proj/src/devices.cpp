#include "portal/devices.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace portal {

VisionRequest FixtureCamera::capture() {
    try {
        return vision_request_from_file(path_);
    } catch (const std::exception& e) {
        throw CameraUnavailable(std::string("fixture camera: ") + e.what());
    }
}

LogFileLightSink::LogFileLightSink(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw std::runtime_error("cannot open light log " + path);
}

void LogFileLightSink::sample(Timestamp ts, double brightness) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", brightness);
    std::lock_guard lock(mutex_);
    out_ << to_iso8601(ts) << ' ' << buf << '\n';
}

void ConsoleLightSink::sample(Timestamp, double brightness) {
    const int n = static_cast<int>(std::lround(std::clamp(brightness, 0.0, 1.0) * width_));
    std::lock_guard lock(mutex_);
    out_ << "\r[" << std::string(static_cast<std::size_t>(n), '#')
         << std::string(static_cast<std::size_t>(width_ - n), ' ') << "]" << std::flush;
}

LightController::LightController() : since_(std::chrono::steady_clock::now()) {}

LightController::~LightController() { stop(); }

void LightController::set(const LightPattern& pattern) {
    pattern.validate();
    std::lock_guard lock(mutex_);
    pattern_ = pattern;
    since_ = std::chrono::steady_clock::now();
    log_.push_back({wall_.now(), pattern});
}

LightPattern LightController::pattern() const {
    std::lock_guard lock(mutex_);
    return pattern_;
}

double LightController::brightness_now() const {
    std::lock_guard lock(mutex_);
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - since_).count();
    return brightness_at(pattern_, std::max(0.0, t));
}

std::vector<LightCommand> LightController::command_log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void LightController::add_sink(std::shared_ptr<LightSink> sink) {
    std::lock_guard lock(mutex_);
    sinks_.push_back(std::move(sink));
}

void LightController::sample_once() {
    const double b = brightness_now();
    std::vector<std::shared_ptr<LightSink>> sinks;
    {
        std::lock_guard lock(mutex_);
        sinks = sinks_;
    }
    const Timestamp ts = wall_.now();
    for (auto& s : sinks) s->sample(ts, b);
}

void LightController::start(double hz) {
    if (!(hz > 0.0)) throw std::invalid_argument("light sample rate must be positive");
    std::lock_guard lock(run_mutex_);
    if (running_) return;
    running_ = true;
    const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / hz));
    sampler_ = std::thread([this, interval] {
        auto next = std::chrono::steady_clock::now();
        std::unique_lock lk(run_mutex_);
        while (running_) {
            lk.unlock();
            sample_once();
            lk.lock();
            next += interval;
            run_cv_.wait_until(lk, next, [this] { return !running_; });
        }
    });
}

void LightController::stop() {
    {
        std::lock_guard lock(run_mutex_);
        if (!running_) return;
        running_ = false;
    }
    run_cv_.notify_all();
    if (sampler_.joinable()) sampler_.join();
}

void RecordingAudioSink::play(const SpeechAudio& audio) {
    std::lock_guard lock(mutex_);
    played_.push_back(audio);
}

std::vector<SpeechAudio> RecordingAudioSink::played() const {
    std::lock_guard lock(mutex_);
    return played_;
}

std::optional<Bytes> FixtureMicrophone::next_clip() {
    std::lock_guard lock(mutex_);
    if (clips_.empty()) return std::nullopt;
    Bytes b = std::move(clips_.front());
    clips_.pop_front();
    return b;
}

}  // namespace portal
