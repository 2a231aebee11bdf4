/** Browser entry point: wires the console to a gateway URL. */

import { GatewayClient } from "./api.js";
import { createApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("gateway") ?? "http://127.0.0.1:8470";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app element");
createApp(root, { client: new GatewayClient(baseUrl) });
