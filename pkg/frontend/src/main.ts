// Entry point.  By default the faceplate talks to the engine that
// served it; pass ?ws=<url> when the page comes from a separate file
// server.

import { UiModel } from "./model.js";
import { Transport } from "./transport.js";
import { buildFaceplate } from "./view.js";

const query = new URLSearchParams(location.search);
const url = query.get("ws") ?? `ws://${location.host}/ws`;

const transport = new Transport((target) => new WebSocket(target));
const model = new UiModel((frame) => transport.send(frame));
transport.onFrame = (frame) => model.applyFrame(frame);
transport.onStatus = (status) => model.setStatus(status);

const render = buildFaceplate(document.getElementById("faceplate")!, model);
model.onChange = render;
render();
transport.connect(url);
