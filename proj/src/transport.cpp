#include "enapp/transport.hpp"

namespace enapp {

void QueueTransport::send(Message m) {
    std::lock_guard lock(mutex_);
    inbox_[m.to].push_back(std::move(m));
}

std::vector<Message> QueueTransport::receive(const AreaId& to) {
    std::lock_guard lock(mutex_);
    auto it = inbox_.find(to);
    if (it == inbox_.end()) return {};
    std::vector<Message> out = std::move(it->second);
    inbox_.erase(it);
    return out;
}

void RecordingTransport::send(Message m) {
    {
        std::lock_guard lock(log_mutex_);
        log_.push_back(m);
    }
    QueueTransport::send(std::move(m));
}

std::vector<Message> RecordingTransport::log() const {
    std::lock_guard lock(log_mutex_);
    return log_;
}

}  // namespace enapp
