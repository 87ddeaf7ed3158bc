/** Minimal WebGL mesh viewer with orbit controls and flat-ish shading. */

import { Mesh, meshBounds } from './meshblob.js';

const VERT_SRC = `
attribute vec3 position;
attribute vec3 normal;
uniform mat4 mvp;
uniform mat4 model;
varying vec3 vNormal;
void main() {
  gl_Position = mvp * vec4(position, 1.0);
  vNormal = mat3(model) * normal;
}`;

const FRAG_SRC = `
precision mediump float;
varying vec3 vNormal;
void main() {
  vec3 n = normalize(vNormal);
  float diffuse = max(dot(n, normalize(vec3(0.4, 0.8, 0.6))), 0.0);
  float rim = max(dot(n, normalize(vec3(-0.5, -0.2, -0.8))), 0.0) * 0.25;
  vec3 base = vec3(0.55, 0.75, 0.55);
  gl_FragColor = vec4(base * (0.25 + 0.75 * diffuse) + rim * vec3(0.2, 0.25, 0.35), 1.0);
}`;

export function vertexNormals(mesh: Mesh): Float32Array {
  const normals = new Float32Array(mesh.vertices.length);
  const v = mesh.vertices;
  for (let t = 0; t < mesh.indices.length; t += 3) {
    const [i0, i1, i2] = [mesh.indices[t], mesh.indices[t + 1], mesh.indices[t + 2]];
    const ax = v[3 * i1] - v[3 * i0];
    const ay = v[3 * i1 + 1] - v[3 * i0 + 1];
    const az = v[3 * i1 + 2] - v[3 * i0 + 2];
    const bx = v[3 * i2] - v[3 * i0];
    const by = v[3 * i2 + 1] - v[3 * i0 + 1];
    const bz = v[3 * i2 + 2] - v[3 * i0 + 2];
    const nx = ay * bz - az * by;
    const ny = az * bx - ax * bz;
    const nz = ax * by - ay * bx;
    for (const i of [i0, i1, i2]) {
      normals[3 * i] += nx;
      normals[3 * i + 1] += ny;
      normals[3 * i + 2] += nz;
    }
  }
  for (let i = 0; i < normals.length; i += 3) {
    const len = Math.hypot(normals[i], normals[i + 1], normals[i + 2]) || 1;
    normals[i] /= len;
    normals[i + 1] /= len;
    normals[i + 2] /= len;
  }
  return normals;
}

function perspective(fovY: number, aspect: number, near: number, far: number): Float32Array {
  const f = 1 / Math.tan(fovY / 2);
  const out = new Float32Array(16);
  out[0] = f / aspect;
  out[5] = f;
  out[10] = (far + near) / (near - far);
  out[11] = -1;
  out[14] = (2 * far * near) / (near - far);
  return out;
}

function matmul(a: Float32Array, b: Float32Array): Float32Array {
  const out = new Float32Array(16);
  for (let r = 0; r < 4; r++) {
    for (let c = 0; c < 4; c++) {
      let s = 0;
      for (let k = 0; k < 4; k++) {
        s += a[k * 4 + c] * b[r * 4 + k];
      }
      out[r * 4 + c] = s;
    }
  }
  return out;
}

export class MeshViewer {
  private gl: WebGLRenderingContext;
  private program: WebGLProgram;
  private positionBuf: WebGLBuffer;
  private normalBuf: WebGLBuffer;
  private indexBuf: WebGLBuffer;
  private indexCount = 0;
  private center: [number, number, number] = [0, 0, 0];
  private radius = 1;
  yaw = 0.7;
  pitch = 0.5;
  zoom = 2.6;

  constructor(private canvas: HTMLCanvasElement) {
    const gl = canvas.getContext('webgl');
    if (!gl) {
      throw new Error('WebGL unavailable');
    }
    gl.getExtension('OES_element_index_uint'); // 32-bit indices for big meshes
    this.gl = gl;
    this.program = this.compile();
    this.positionBuf = gl.createBuffer() as WebGLBuffer;
    this.normalBuf = gl.createBuffer() as WebGLBuffer;
    this.indexBuf = gl.createBuffer() as WebGLBuffer;
    this.bindOrbit();
  }

  private compile(): WebGLProgram {
    const gl = this.gl;
    const mk = (type: number, src: string) => {
      const shader = gl.createShader(type) as WebGLShader;
      gl.shaderSource(shader, src);
      gl.compileShader(shader);
      if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(gl.getShaderInfoLog(shader) ?? 'shader compile failed');
      }
      return shader;
    };
    const program = gl.createProgram() as WebGLProgram;
    gl.attachShader(program, mk(gl.VERTEX_SHADER, VERT_SRC));
    gl.attachShader(program, mk(gl.FRAGMENT_SHADER, FRAG_SRC));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(gl.getProgramInfoLog(program) ?? 'link failed');
    }
    return program;
  }

  private bindOrbit(): void {
    let dragging = false;
    let last: [number, number] = [0, 0];
    this.canvas.addEventListener('pointerdown', (e) => {
      dragging = true;
      last = [e.clientX, e.clientY];
    });
    window.addEventListener('pointermove', (e) => {
      if (!dragging) {
        return;
      }
      this.yaw += (e.clientX - last[0]) * 0.01;
      this.pitch = Math.min(1.5, Math.max(-1.5, this.pitch + (e.clientY - last[1]) * 0.01));
      last = [e.clientX, e.clientY];
      this.render();
    });
    window.addEventListener('pointerup', () => {
      dragging = false;
    });
    this.canvas.addEventListener('wheel', (e) => {
      e.preventDefault();
      this.zoom = Math.min(8, Math.max(1.2, this.zoom * (e.deltaY > 0 ? 1.1 : 0.9)));
      this.render();
    });
  }

  setMesh(mesh: Mesh): void {
    const gl = this.gl;
    const normals = vertexNormals(mesh);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.positionBuf);
    gl.bufferData(gl.ARRAY_BUFFER, mesh.vertices, gl.STATIC_DRAW);
    gl.bindBuffer(gl.ARRAY_BUFFER, this.normalBuf);
    gl.bufferData(gl.ARRAY_BUFFER, normals, gl.STATIC_DRAW);
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.indexBuf);
    gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, mesh.indices, gl.STATIC_DRAW);
    this.indexCount = mesh.indices.length;
    const bounds = meshBounds(mesh);
    this.center = bounds.center;
    this.radius = bounds.radius;
    this.render();
  }

  render(): void {
    const gl = this.gl;
    gl.viewport(0, 0, this.canvas.width, this.canvas.height);
    gl.clearColor(0.07, 0.08, 0.1, 1);
    gl.enable(gl.DEPTH_TEST);
    gl.clear(gl.COLOR_BUFFER_BIT | gl.DEPTH_BUFFER_BIT);
    if (this.indexCount === 0) {
      return;
    }
    const dist = this.zoom * this.radius;
    const eye = [
      this.center[0] + dist * Math.cos(this.pitch) * Math.sin(this.yaw),
      this.center[1] + dist * Math.sin(this.pitch),
      this.center[2] + dist * Math.cos(this.pitch) * Math.cos(this.yaw),
    ];
    const view = lookAt(eye as [number, number, number], this.center, [0, 1, 0]);
    const proj = perspective(0.9, this.canvas.width / this.canvas.height, 0.1 * this.radius, 40 * this.radius);
    const mvp = matmul(proj, view);
    const model = new Float32Array([1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1]);

    gl.useProgram(this.program);
    const bind = (buf: WebGLBuffer, name: string) => {
      gl.bindBuffer(gl.ARRAY_BUFFER, buf);
      const loc = gl.getAttribLocation(this.program, name);
      gl.enableVertexAttribArray(loc);
      gl.vertexAttribPointer(loc, 3, gl.FLOAT, false, 0, 0);
    };
    bind(this.positionBuf, 'position');
    bind(this.normalBuf, 'normal');
    gl.uniformMatrix4fv(gl.getUniformLocation(this.program, 'mvp'), false, mvp);
    gl.uniformMatrix4fv(gl.getUniformLocation(this.program, 'model'), false, model);
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, this.indexBuf);
    gl.drawElements(gl.TRIANGLES, this.indexCount, gl.UNSIGNED_INT, 0);
  }
}

function lookAt(eye: [number, number, number], at: [number, number, number], up: [number, number, number]): Float32Array {
  const zx = eye[0] - at[0];
  const zy = eye[1] - at[1];
  const zz = eye[2] - at[2];
  const zl = Math.hypot(zx, zy, zz) || 1;
  const z = [zx / zl, zy / zl, zz / zl];
  const x = [up[1] * z[2] - up[2] * z[1], up[2] * z[0] - up[0] * z[2], up[0] * z[1] - up[1] * z[0]];
  const xl = Math.hypot(x[0], x[1], x[2]) || 1;
  x[0] /= xl;
  x[1] /= xl;
  x[2] /= xl;
  const y = [z[1] * x[2] - z[2] * x[1], z[2] * x[0] - z[0] * x[2], z[0] * x[1] - z[1] * x[0]];
  return new Float32Array([
    x[0], y[0], z[0], 0,
    x[1], y[1], z[1], 0,
    x[2], y[2], z[2], 0,
    -(x[0] * eye[0] + x[1] * eye[1] + x[2] * eye[2]),
    -(y[0] * eye[0] + y[1] * eye[1] + y[2] * eye[2]),
    -(z[0] * eye[0] + z[1] * eye[1] + z[2] * eye[2]),
    1,
  ]);
}
