/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const property_fit: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const property_plane: (a: number, b: number, c: number) => [number, number, number, number];
export const zero_shot_trials: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
