// Shapes of the JSON documents served by the trace API.
export {};
