#include "oranlab/xapp_sdk.hpp"

namespace oranlab::sdk {

XappHandle::XappHandle(ric::Ric& ric, const std::string& name)
    : ric_(ric), name_(name), id_(ric.register_xapp(name)),
      queue_(ric.queue(id_)) {}

std::vector<GnbId> XappHandle::get_gnb_id_list() const {
  return ric_.gnb_ids();
}

std::optional<ric::RoutedMessage> XappHandle::get_queued_rx_msg() {
  return queue_->pop();
}

ric::RequestToken XappHandle::e2ap_control_request(
    GnbId gnb, const e2::SmPayload& payload) {
  return ric_.route_control(id_, gnb, e2::encode_sm_payload(payload));
}

std::uint32_t XappHandle::e2ap_subscribe(GnbId gnb, std::uint32_t period_ms) {
  return ric_.subscribe(id_, gnb, period_ms);
}

}  // namespace oranlab::sdk
