#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "portal/providers.hpp"
#include "portal/ritual.hpp"
#include "portal/time.hpp"

// Hardware seams. The installation's camera, LED and voice bonnet are
// replaced by these interfaces; the defaults are file- and log-backed.
namespace portal {

class CameraUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Camera {
public:
    virtual ~Camera() = default;
    virtual VisionRequest capture() = 0;  // throws CameraUnavailable
};

// Returns the same fixture image on every capture.
class FixtureCamera final : public Camera {
public:
    explicit FixtureCamera(std::string path) : path_(std::move(path)) {}
    VisionRequest capture() override;

private:
    std::string path_;
};

class NoCamera final : public Camera {
public:
    VisionRequest capture() override { throw CameraUnavailable("no camera attached"); }
};

class LightSink {
public:
    virtual ~LightSink() = default;
    virtual void sample(Timestamp ts, double brightness) = 0;
};

// "<iso8601> <brightness>" per line.
class LogFileLightSink final : public LightSink {
public:
    explicit LogFileLightSink(const std::string& path);
    void sample(Timestamp ts, double brightness) override;

private:
    std::mutex mutex_;
    std::ofstream out_;
};

// Redraws a one-line bar on a terminal.
class ConsoleLightSink final : public LightSink {
public:
    explicit ConsoleLightSink(std::ostream& out, int width = 40) : out_(out), width_(width) {}
    void sample(Timestamp ts, double brightness) override;

private:
    std::mutex mutex_;
    std::ostream& out_;
    int width_;
};

class CallbackLightSink final : public LightSink {
public:
    explicit CallbackLightSink(std::function<void(Timestamp, double)> fn) : fn_(std::move(fn)) {}
    void sample(Timestamp ts, double brightness) override { fn_(ts, brightness); }

private:
    std::function<void(Timestamp, double)> fn_;
};

struct LightCommand {
    Timestamp ts;
    LightPattern pattern;
};

// Holds the current pattern and drives sinks from a sampler thread
// (30 Hz by default). The engine writes the pattern; the sampler only
// reads it.
class LightController {
public:
    LightController();
    ~LightController();
    LightController(const LightController&) = delete;
    LightController& operator=(const LightController&) = delete;

    void set(const LightPattern& pattern);
    LightPattern pattern() const;
    double brightness_now() const;
    std::vector<LightCommand> command_log() const;

    void add_sink(std::shared_ptr<LightSink> sink);
    void sample_once();
    void start(double hz = 30.0);
    void stop();

private:
    mutable std::mutex mutex_;
    LightPattern pattern_;
    std::chrono::steady_clock::time_point since_;
    std::vector<LightCommand> log_;
    std::vector<std::shared_ptr<LightSink>> sinks_;
    SystemClock wall_;

    std::mutex run_mutex_;
    std::condition_variable run_cv_;
    bool running_ = false;
    std::thread sampler_;
};

class AudioSink {
public:
    virtual ~AudioSink() = default;
    virtual void play(const SpeechAudio& audio) = 0;
};

class NullAudioSink final : public AudioSink {
public:
    void play(const SpeechAudio&) override {}
};

class RecordingAudioSink final : public AudioSink {
public:
    void play(const SpeechAudio& audio) override;
    std::vector<SpeechAudio> played() const;

private:
    mutable std::mutex mutex_;
    std::vector<SpeechAudio> played_;
};

// Source of captured utterance clips for the transcription frontend.
class MicrophoneSource {
public:
    virtual ~MicrophoneSource() = default;
    virtual std::optional<Bytes> next_clip() = 0;  // nullopt when closed
};

class FixtureMicrophone final : public MicrophoneSource {
public:
    explicit FixtureMicrophone(std::vector<Bytes> clips) : clips_(clips.begin(), clips.end()) {}
    std::optional<Bytes> next_clip() override;

private:
    std::mutex mutex_;
    std::deque<Bytes> clips_;
};

}  // namespace portal
