import { ServiceClient } from "./api.js";
import { App } from "./app.js";

const mount = document.getElementById("app");
if (mount === null) throw new Error("missing #app element");

const client = new ServiceClient(window.location.origin);
const app = new App(mount, client);
app.render();
