export * from "./types.js";
export * from "./theme.js";
export * from "./earcons.js";
export * from "./captions.js";
export * from "./speech.js";
export * from "./player.js";
export * from "./events.js";
export * from "./micState.js";
export * from "./api.js";
